"""Command-line entry point: ``dualsignal <command> ...``.

Exit codes: 0 success, 1 input error, 2 configuration error, 3 computed but
not converged. Settings resolve as flags over config file over defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, dualspace
from .diagnostics import diagnose
from .io import (
    default_output_dir,
    read_columns,
    read_json,
    read_series,
    write_csv,
    write_json,
)
from .optimizer import OptimizerConfig, decompose
from .spc import spc_weights
from .synth import NORMAL_METHOD, PRNG, ScenarioSpec, generate, standard_scenarios
from .tuning import TuningSpec, tune
from .types import (
    ConfigurationError,
    DegenerateInputError,
    DualSignal,
    Hyperparameters,
    InvalidInputError,
    OutOfDomainError,
    TuningError,
)

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2, 3

CONFIG_KEYS = {
    "schema_version",
    "hyperparameters",
    "optimizer",
    "column",
    "output_dir",
    "tuning",
    "scenario",
    "spec",
    "seed",
    "grid",
    "bins",
    "idw_power",
    "forecast_steps",
    "lb_lags",
    "adf_max_lag",
    "best_score",
    "metadata",
}

# flag name -> hyperparameter field
H_FLAGS = {
    "mode": "mode",
    "beta_mean": "beta_mean",
    "beta_disp": "beta_disp",
    "gamma_mean": "gamma_mean",
    "gamma_disp": "gamma_disp",
    "theta": "theta",
    "spc_window": "spc_window",
    "p_cutoff": "p_cutoff",
    "weight_scheme": "weight_scheme",
    "fit_kind": "fit_kind",
    "reg_kind": "reg_kind",
    "z_mode": "z_mode",
    "weight_alignment": "weight_alignment",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _report("ConfigurationError", message)
        raise SystemExit(EXIT_CONFIG)


def _report(kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _add_common(p: argparse.ArgumentParser, series_input=True):
    if series_input:
        p.add_argument("input", help="CSV file with the series")
        p.add_argument("--column", help="value column name or 1-based index")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory (default: $DUALSIGNAL_OUTPUT_DIR or .)")


def _add_h(p: argparse.ArgumentParser):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--mode", choices=["sequential", "joint"])
    for name in ("beta_mean", "beta_disp", "gamma_mean", "gamma_disp", "theta", "p_cutoff"):
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    g.add_argument("--spc-window", dest="spc_window", type=int)
    g.add_argument("--weight-scheme", dest="weight_scheme", choices=["none", "linear", "transformed", "binary"])
    g.add_argument("--fit-kind", dest="fit_kind")
    g.add_argument("--reg-kind", dest="reg_kind")
    g.add_argument("--z-mode", dest="z_mode", choices=["preceding", "max_of_both"])
    g.add_argument("--weight-alignment", dest="weight_alignment", choices=["endpoint", "span"])
    g.add_argument("--c-beta", dest="c_beta", type=float, help="estimate beta from the data with this constant")
    g.add_argument("--max-iterations", dest="max_iterations", type=int)
    g.add_argument("--rel-tolerance", dest="rel_tolerance", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualsignal", description="Mean and dispersion decomposition of time series.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", help="fit mean and dispersion signals")
    _add_common(p)
    _add_h(p)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("scenario", nargs="?", help="scenario name (omit when --spec is given)")
    p.add_argument("--spec", help="JSON scenario spec file")
    p.add_argument("--seed", type=int)
    p.add_argument("--length", type=int, help="series length for named scenarios")
    _add_common(p, series_input=False)

    p = sub.add_parser("spc", help="per-point SPC z, p and weights")
    _add_common(p)
    _add_h(p)

    p = sub.add_parser("tune", help="search hyperparameters for white-noise residuals")
    p.add_argument("input", nargs="?", help="CSV series (omit when --scenario is given)")
    p.add_argument("--column")
    p.add_argument("--scenario", help="tune on a named synthetic scenario instead of a file")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--budget", type=int)
    p.add_argument("--method", choices=["grid", "nelder_mead", "grid_then_nelder_mead"])
    _add_common(p, series_input=False)
    _add_h(p)

    p = sub.add_parser("dualspace", help="state-space analytics of a decomposition")
    p.add_argument("input", help="decomposition.csv or any CSV with m and s columns")
    p.add_argument("--grid", type=int, nargs=2, metavar=("NM", "NS"))
    p.add_argument("--bins", type=int)
    p.add_argument("--idw-power", dest="idw_power", type=float)
    p.add_argument("--forecast-steps", dest="forecast_steps", type=int)
    _add_common(p, series_input=False)

    p = sub.add_parser("diagnose", help="stationarity diagnostics of a series")
    _add_common(p)
    p.add_argument("--lb-lags", dest="lb_lags", type=int)
    p.add_argument("--adf-max-lag", dest="adf_max_lag", type=int)
    return parser


def _load_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    cfg = read_json(args.config)
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _pick(args, cfg, name, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _resolve_h(args, cfg) -> Hyperparameters:
    data = dict(cfg.get("hyperparameters", {}))
    for flag, field_name in H_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[field_name] = value
    if getattr(args, "c_beta", None) is not None:
        data["beta_rule"] = {"kind": "estimated", "c_beta": args.c_beta}
    return Hyperparameters.from_dict(data)


def _resolve_optimizer(args, cfg) -> OptimizerConfig:
    data = dict(cfg.get("optimizer", {}))
    unknown = set(data) - set(OptimizerConfig.__dataclass_fields__)
    if unknown:
        raise ConfigurationError(f"unknown optimizer keys: {sorted(unknown)}")
    for name in ("max_iterations", "rel_tolerance"):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if "continuation" in data:
        data["continuation"] = tuple(data["continuation"])
    return OptimizerConfig(**data)


def _out_dir(args, cfg) -> Path:
    value = getattr(args, "out", None) or cfg.get("output_dir")
    return Path(value) if value else default_output_dir()


def _input(args, cfg):
    return read_series(args.input, _pick(args, cfg, "column"))


def _require_length(x, need: int, what: str):
    # a series too short for the configured windows is a configuration problem
    if x.size < need:
        raise ConfigurationError(f"series of length {x.size} is too short for {what} (need >= {need})")


def _metadata(args, h: Optional[Hyperparameters] = None, **extra) -> dict:
    meta = {"command": args.command, "package_version": __version__}
    if getattr(args, "input", None):
        meta["input"] = str(args.input)
    if h is not None:
        meta["hyperparameters"] = h.to_dict()
    meta.update(extra)
    return meta


def cmd_decompose(args) -> int:
    cfg = _load_config(args)
    h = _resolve_h(args, cfg)
    opt = _resolve_optimizer(args, cfg)
    labels, x, column = _input(args, cfg)
    need = max(h.spc_window + 2, 3) if h.weight_scheme.kind != "none" else 3
    _require_length(x, need, "decomposition")
    res = decompose(x, h, opt)
    out = _out_dir(args, cfg)
    header = (["label"] if labels else []) + ["t", "x", "m", "s", "eps", "w"]
    rows = (
        ([labels[i]] if labels else []) + [i + 1, x[i], res.mean[i], res.dispersion[i], res.noise.values[i], res.weights[i]]
        for i in range(x.size)
    )
    write_csv(out / "decomposition.csv", header, rows)
    meta = _metadata(
        args,
        res.hyperparameters,
        column=column,
        optimizer={k: getattr(opt, k) for k in OptimizerConfig.__dataclass_fields__},
        converged=res.converged,
        iterations=res.iterations,
        s_floor=res.s_floor,
    )
    write_json(out / "diagnostics.json", {"metadata": meta, "diagnostics": res.diagnostics.to_dict()})
    write_json(out / "loss.json", {"metadata": meta, "loss_value": res.loss_value, "loss": res.loss})
    if not res.converged:
        _report("NotConverged", f"optimizer stopped after {res.iterations} iterations without converging")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    seed = _pick(args, cfg, "seed", 0)
    spec_file = args.spec or cfg.get("spec")
    name = args.scenario or cfg.get("scenario")
    if spec_file:
        spec_data = read_json(spec_file) if isinstance(spec_file, str) else spec_file
        spec_data = {k: v for k, v in spec_data.items() if k != "schema_version"}
        spec = ScenarioSpec.from_dict(spec_data).with_seed(int(seed))
        name = name or "custom"
    else:
        suite = standard_scenarios(T=args.length or 200)
        if name not in suite:
            raise ConfigurationError(f"unknown scenario {name!r}; valid names: {sorted(suite)}")
        spec = suite[name].with_seed(int(seed))
    series = generate(spec)
    out = _out_dir(args, cfg)
    comment = {
        "schema_version": "1.0",
        "scenario": name,
        "spec": spec.to_dict(),
        "prng": PRNG,
        "normal_method": NORMAL_METHOD,
        "numpy_version": np.__version__,
    }
    rows = (
        (t + 1, series.x.values[t], series.true_mean[t], series.true_disp[t], series.true_noise[t]) for t in range(spec.T)
    )
    write_csv(out / "synthetic.csv", ["t", "x", "true_m", "true_s", "true_eps"], rows, comment=comment)
    return EXIT_OK


def cmd_spc(args) -> int:
    cfg = _load_config(args)
    h = _resolve_h(args, cfg)
    labels, x, column = _input(args, cfg)
    _require_length(x, h.spc_window + 2, f"SPC window n={h.spc_window}")
    z, p, w = spc_weights(x, h)
    out = _out_dir(args, cfg)
    header = (["label"] if labels else []) + ["t", "x", "z", "p", "w"]
    rows = (([labels[i]] if labels else []) + [i + 1, x[i], z.values[i], p[i], w[i]] for i in range(x.size))
    write_csv(out / "spc.csv", header, rows)
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _load_config(args)
    h = _resolve_h(args, cfg)
    opt = _resolve_optimizer(args, cfg)
    tcfg = dict(cfg.get("tuning", {}))
    unknown = set(tcfg) - {"search_space", "objective_weights", "budget", "seeds", "method"}
    if unknown:
        raise ConfigurationError(f"unknown tuning keys: {sorted(unknown)}")
    for name in ("budget", "seeds", "method"):
        value = getattr(args, name, None)
        if value is not None:
            tcfg[name] = value
    tcfg.setdefault("search_space", {"c_beta": [25.0, 100.0], "gamma_mean": [0.5, 2.0]})
    if "seeds" in tcfg:
        tcfg["seeds"] = tuple(tcfg["seeds"])
    spec = TuningSpec(base=h, optimizer=opt, **tcfg)
    scenario = _pick(args, cfg, "scenario")
    if scenario:
        suite = standard_scenarios()
        if scenario not in suite:
            raise ConfigurationError(f"unknown scenario {scenario!r}; valid names: {sorted(suite)}")
        data, column = suite[scenario], None
    elif args.input:
        _, data, column = read_series(args.input, _pick(args, cfg, "column"))
        need = max(h.spc_window + 2, 3)
        _require_length(data, need, "tuning")
    else:
        raise ConfigurationError("tune needs an input file or --scenario")
    result = tune(data, spec)
    out = _out_dir(args, cfg)
    meta = _metadata(args, None, scenario=scenario, column=column, tuning=spec.to_dict())
    write_json(
        out / "best_h.json",
        {"metadata": meta, "hyperparameters": result.best_h.to_dict(), "best_score": result.best_score},
    )
    keys = sorted(spec.search_space)
    rows = (
        [rank, e.index, e.score] + [e.point.get(k) for k in keys] + [json.dumps(e.h.to_dict(), sort_keys=True), e.error or ""]
        for rank, e in enumerate(result.trace)
    )
    write_csv(out / "trace.csv", ["rank", "index", "score"] + keys + ["hyperparameters", "error"], rows)
    return EXIT_OK


def _point_mass_grid(m: float, s: float, grid) -> dualspace.DensityGrid:
    # every state coincides: put all mass in the single cell holding the point
    nm, ns = grid
    half_m = max(abs(m), 1.0) * 1e-3
    half_s = max(abs(s), 1.0) * 1e-3
    m_axis = np.linspace(m - half_m, m + half_m, nm + 1)
    s_axis = np.linspace(s - half_s, s + half_s, ns + 1)
    cells = np.zeros((nm, ns))
    i, j = dualspace._locate(m_axis, s_axis, m, s)
    cells[i, j] = 1.0
    return dualspace.DensityGrid(m_axis, s_axis, cells, (0.0, 0.0))


def cmd_dualspace(args) -> int:
    cfg = _load_config(args)
    cols = read_columns(args.input, ["m", "s"])
    m, s = cols["m"], cols["s"]
    if m.size < 2:
        raise InvalidInputError("dual-space analytics need at least 2 states")
    grid = tuple(_pick(args, cfg, "grid", (20, 20)))
    bins = int(_pick(args, cfg, "bins", 4))
    idw_power = float(_pick(args, cfg, "idw_power", 2.0))
    steps = int(_pick(args, cfg, "forecast_steps", 0))
    pts = dualspace.states(DualSignal(m, s), start=1)
    edges = dualspace.transitions(pts)
    if np.ptp(m) == 0 and np.ptp(s) == 0:
        density = _point_mass_grid(m[0], s[0], grid)
    else:
        density = dualspace.density_grid(pts, grid)
    field = dualspace.vector_field(edges, density, idw_power=idw_power)
    forecast = dualspace.forecast_next(pts[-1], field, density, steps) if steps else []
    out = _out_dir(args, cfg)

    rows = [("observed", p.t, p.m, p.s) for p in pts] + [("forecast", p.t, p.m, p.s) for p in forecast]
    write_csv(out / "states.csv", ["kind", "t", "m", "s"], rows)
    write_csv(out / "edges.csv", ["t_from", "t_to", "m", "s", "dm", "ds"], ((e.t_from, e.t_to, e.m, e.s, e.dm, e.ds) for e in edges))
    cm, cs = density.centers()
    nm, ns = density.shape
    cell_rows = [
        (i, j, cm[i], cs[j], density.m_axis[i], density.m_axis[i + 1], density.s_axis[j], density.s_axis[j + 1])
        for i in range(nm)
        for j in range(ns)
    ]
    write_csv(
        out / "density.csv",
        ["i", "j", "m_center", "s_center", "m_lo", "m_hi", "s_lo", "s_hi", "mass"],
        (r + (density.cells[r[0], r[1]],) for r in cell_rows),
    )
    write_csv(
        out / "vector_field.csv",
        ["i", "j", "m_center", "s_center", "dm", "ds", "support", "interpolated"],
        (
            (i, j, cm[i], cs[j], field.vectors[i, j, 0], field.vectors[i, j, 1], field.support[i, j], field.interpolated[i, j])
            for i, j, *_ in cell_rows
        ),
    )
    summary = {
        "metadata": _metadata(args, None, grid=list(grid), bins=bins, idw_power=idw_power, forecast_steps=steps),
        "grid": {"m_axis": density.m_axis, "s_axis": density.s_axis, "bandwidth": list(density.bandwidth)},
        "n_states": len(pts),
    }
    try:
        summary["mutual_information"] = dualspace.mutual_information(m, s, bins)
    except (DegenerateInputError, InvalidInputError) as exc:
        summary["mutual_information"] = None
        summary["mutual_information_note"] = str(exc)
    summary["correlation"] = float(np.corrcoef(m, s)[0, 1]) if np.ptp(m) > 0 and np.ptp(s) > 0 else None
    write_json(out / "dualspace.json", summary)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = _load_config(args)
    labels, x, column = _input(args, cfg)
    _require_length(x, 3, "diagnostics")
    lb = _pick(args, cfg, "lb_lags")
    adf = _pick(args, cfg, "adf_max_lag")
    report = diagnose(x, None, lb_lags=lb, adf_max_lag=adf)
    out = _out_dir(args, cfg)
    write_json(out / "diagnostics.json", {"metadata": _metadata(args, None, column=column), "diagnostics": report.to_dict()})
    return EXIT_OK


COMMANDS = {
    "decompose": cmd_decompose,
    "synth": cmd_synth,
    "spc": cmd_spc,
    "tune": cmd_tune,
    "dualspace": cmd_dualspace,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        _report("ConfigurationError", str(exc))
        return EXIT_CONFIG
    except TuningError as exc:
        _report("TuningError", str(exc))
        return EXIT_INPUT
    except (InvalidInputError, DegenerateInputError, OutOfDomainError) as exc:
        _report(type(exc).__name__, str(exc))
        return EXIT_INPUT
    except OSError as exc:
        _report("InputError", str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
