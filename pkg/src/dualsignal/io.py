"""CSV and JSON reading and writing for the command-line tools.

Floats are written with ``repr`` so every value parses back to the identical
double. Non-finite floats become ``null`` in JSON and an empty cell in CSV.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .types import ConfigurationError, InvalidInputError

SCHEMA_VERSION = "1.0"
OUTPUT_DIR_ENV = "DUALSIGNAL_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or ".")


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def write_json(path: Path, payload: dict) -> Path:
    doc = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], comment: Optional[dict] = None) -> Path:
    """Write a header row and data rows; ``comment`` becomes a leading ``#`` JSON line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if comment is not None:
            fh.write("# " + json.dumps(_jsonable(comment), sort_keys=True, allow_nan=False) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must hold a JSON object")
    return data


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_table(path) -> Tuple[List[str], List[List[str]]]:
    """Rows of a CSV file, skipping ``#`` comment lines.

    A header is recognised when the first row contains a non-numeric cell;
    otherwise columns are named ``col1``, ``col2``, and so on.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = [line for line in fh if not line.startswith("#")]
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in csv.reader(lines) if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidInputError(f"{path} contains no data")
    first = rows[0]
    if all(_is_float(c) for c in first if c.strip()) and all(c.strip() for c in first):
        header = [f"col{i + 1}" for i in range(len(first))]
    else:
        header, rows = [c.strip() for c in first], rows[1:]
    width = len(header)
    for k, r in enumerate(rows, start=1):
        if len(r) != width:
            raise InvalidInputError(f"{path}: row {k} has {len(r)} cells, expected {width}")
    return header, rows


def _column_index(header: Sequence[str], column) -> int:
    if isinstance(column, int) or (isinstance(column, str) and column.isdigit()):
        idx = int(column)
        # numeric selectors are 1-based
        if not 1 <= idx <= len(header):
            raise InvalidInputError(f"column {idx} out of range (1..{len(header)})")
        return idx - 1
    if column not in header:
        raise InvalidInputError(f"column {column!r} not found; available: {list(header)}")
    return header.index(column)


def parse_column(path, header, rows, idx: int) -> np.ndarray:
    values = np.empty(len(rows))
    for k, r in enumerate(rows):
        cell = r[idx].strip()
        try:
            v = float(cell)
        except ValueError:
            v = math.nan
        if not math.isfinite(v):
            raise InvalidInputError(f"{path}: row {k + 1}, column {header[idx]!r} is not a finite number ({cell!r})")
        values[k] = v
    return values


def read_series(path, column=None) -> Tuple[Optional[List[str]], np.ndarray, str]:
    """Read one value column; returns ``(labels, values, column_name)``.

    Without a selector a single column is the value column, and a two-column
    file is read as ``(label, value)`` pairs. Labels are passed through
    untouched and never interpreted as time.
    """
    header, rows = read_table(path)
    labels = None
    if column is not None:
        idx = _column_index(header, column)
    elif len(header) == 1:
        idx = 0
    elif len(header) == 2:
        idx = 1
        labels = [r[0] for r in rows]
    else:
        raise InvalidInputError(f"{path} has {len(header)} columns; choose one with --column")
    return labels, parse_column(path, header, rows, idx), header[idx]


def read_columns(path, names: Sequence[str]) -> Dict[str, np.ndarray]:
    header, rows = read_table(path)
    missing = [n for n in names if n not in header]
    if missing:
        raise InvalidInputError(f"{path} lacks required columns {missing}; found {header}")
    return {n: parse_column(path, header, rows, header.index(n)) for n in names}
