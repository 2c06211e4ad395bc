"""Hyperparameter search that drives the isolated noise toward white noise.

The search screens a coarse grid and then refines the numeric multipliers with
a Nelder-Mead simplex in log space. The composite score aggregating the
stationarity diagnostics is this package's own construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .diagnostics import DiagnosticsReport
from .optimizer import OptimizerConfig, decompose
from .synth import ScenarioSpec, generate
from .types import (
    BetaRule,
    ConfigurationError,
    DualSignalError,
    Hyperparameters,
    TimeSeries,
    TuningError,
)

METHODS = ("grid", "nelder_mead", "grid_then_nelder_mead")
# multipliers refined on a log scale
CONTINUOUS = ("beta_mean", "beta_disp", "gamma_mean", "gamma_disp", "theta", "c_beta", "p_cutoff")


@dataclass(frozen=True)
class ScoreWeights:
    """Weights ``a1..a5`` of the composite score plus the optional step term.

    ``steps`` may be negative to reward rather than penalize jumps in M.
    """

    adf: float = 1.0
    lb: float = 10.0
    kl: float = 1.0
    drift: float = 0.5
    corr: float = 0.5
    steps: float = 0.0
    jump_threshold: Optional[float] = None

    @classmethod
    def from_value(cls, value) -> "ScoreWeights":
        if value is None:
            return cls()
        if isinstance(value, ScoreWeights):
            return value
        if isinstance(value, dict):
            return cls(**value)
        vals = tuple(value)
        if len(vals) not in (5, 6, 7):
            raise ConfigurationError(f"expected 5 to 7 score weights, got {len(vals)}")
        return cls(*vals)

    def to_dict(self) -> dict:
        return {
            "adf": self.adf,
            "lb": self.lb,
            "kl": self.kl,
            "drift": self.drift,
            "corr": self.corr,
            "steps": self.steps,
            "jump_threshold": self.jump_threshold,
        }


def stationarity_score(report: DiagnosticsReport, weights=None, mean=None) -> float:
    """Composite non-stationarity penalty; 0 for ideal white-noise residuals.

    A NaN diagnostic (a test that could not run) makes the score infinite.
    ``mean`` is needed only when the step term is active.
    """
    a = ScoreWeights.from_value(weights)
    used = (report.adf_p, report.lb_p, report.kl_to_standard_normal, report.rolling_mean_drift,
            report.rolling_std_drift, report.corr_noise_mean, report.corr_noise_disp)
    if any(math.isnan(v) for v in used):
        return math.inf
    terms = [
        a.adf * max(0.0, report.adf_p - 0.05),
        a.lb * max(0.0, 0.05 - report.lb_p),
        a.kl * report.kl_to_standard_normal,
        a.drift * (report.rolling_mean_drift + report.rolling_std_drift),
        a.corr * (abs(report.corr_noise_mean) + abs(report.corr_noise_disp)),
    ]
    if a.steps:
        if mean is None or a.jump_threshold is None:
            raise ConfigurationError("the step term needs the mean signal and a jump_threshold")
        m = np.asarray(mean, dtype=float)
        terms.append(a.steps * np.count_nonzero(np.abs(np.diff(m)) > a.jump_threshold) / m.size)
    score = float(sum(terms))
    return score if math.isfinite(score) else math.inf


@dataclass(frozen=True)
class TuningSpec:
    """What to search and how.

    ``search_space`` maps hyperparameter names to candidate lists. Besides the
    fields of :class:`Hyperparameters` it accepts ``c_beta`` (switches to the
    estimated beta rule) and the value ``"estimated"`` for ``beta_mean``.
    Numeric multipliers are refined by Nelder-Mead within the span of their
    listed candidates.
    """

    search_space: Dict[str, Sequence]
    objective_weights: ScoreWeights = field(default_factory=ScoreWeights)
    budget: int = 50
    seeds: Tuple[int, ...] = (0,)
    method: str = "grid_then_nelder_mead"
    base: Hyperparameters = field(default_factory=Hyperparameters)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        object.__setattr__(self, "objective_weights", ScoreWeights.from_value(self.objective_weights))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "search_space", {k: tuple(v) for k, v in self.search_space.items()})
        if not self.search_space or any(len(v) == 0 for v in self.search_space.values()):
            raise ConfigurationError("search space must be non-empty")
        if int(self.budget) != self.budget or self.budget < 1:
            raise ConfigurationError(f"budget must be a positive integer, got {self.budget}")
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        known = set(Hyperparameters.__dataclass_fields__) | {"c_beta"}
        unknown = set(self.search_space) - known
        if unknown:
            raise ConfigurationError(f"unknown search-space keys: {sorted(unknown)}")
        # fail early on candidates that do not form valid hyperparameters
        for key, values in self.search_space.items():
            for v in values:
                apply_point(self.base, {key: v})

    def grid(self) -> List[Dict[str, object]]:
        keys = sorted(self.search_space)
        if self.method == "nelder_mead":
            # start from the first candidate of every parameter
            return [{k: self.search_space[k][0] for k in keys}]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.search_space[k] for k in keys))]

    def bounds(self) -> Dict[str, Tuple[float, float]]:
        out = {}
        for key in sorted(self.search_space):
            if key not in CONTINUOUS:
                continue
            nums = [v for v in self.search_space[key] if _is_number(v)]
            if len(nums) >= 2 and min(nums) > 0 and min(nums) < max(nums):
                out[key] = (float(min(nums)), float(max(nums)))
        return out

    def to_dict(self) -> dict:
        return {
            "search_space": {k: list(v) for k, v in sorted(self.search_space.items())},
            "objective_weights": self.objective_weights.to_dict(),
            "budget": self.budget,
            "seeds": list(self.seeds),
            "method": self.method,
            "base": self.base.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TuningSpec":
        data = dict(data)
        unknown = set(data) - {"search_space", "objective_weights", "budget", "seeds", "method", "base"}
        if unknown:
            raise ConfigurationError(f"unknown tuning keys: {sorted(unknown)}")
        if "base" in data:
            data["base"] = Hyperparameters.from_dict(data["base"])
        if "seeds" in data:
            data["seeds"] = tuple(data["seeds"])
        return cls(**data)


@dataclass(frozen=True)
class TraceEntry:
    index: int
    h: Hyperparameters
    point: Dict[str, object]
    score: float
    diagnostics: Tuple[Optional[DiagnosticsReport], ...]
    error: Optional[str] = None


@dataclass(frozen=True)
class TuningResult:
    best_h: Hyperparameters
    best_score: float
    trace: Tuple[TraceEntry, ...]

    @property
    def best_point(self) -> Dict[str, object]:
        return min(self.trace, key=_rank).point


def _is_number(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _rank(entry: TraceEntry):
    return (entry.score, entry.index)


def apply_point(base: Hyperparameters, point: Dict[str, object]) -> Hyperparameters:
    """Hyperparameters obtained by overriding ``base`` with a search point."""
    changes = dict(point)
    c_beta = changes.pop("c_beta", None)
    if changes.get("beta_mean") == "estimated":
        changes.pop("beta_mean")
        changes["beta_rule"] = BetaRule("estimated", c_beta if c_beta is not None else base.beta_rule.c_beta)
    elif c_beta is not None:
        changes["beta_rule"] = BetaRule("estimated", float(c_beta))
    for key in ("spc_window",):
        if key in changes:
            changes[key] = int(changes[key])
    try:
        return base.replace(**changes)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def _series(x, seeds):
    if isinstance(x, ScenarioSpec):
        return [generate(x.with_seed(s)).x.values for s in seeds]
    values = x.values if isinstance(x, TimeSeries) else TimeSeries(x).values
    return [values]


def tune(x: Union[TimeSeries, Sequence[float], ScenarioSpec], spec: TuningSpec) -> TuningResult:
    """Search ``spec.search_space`` for the hyperparameters with the lowest mean score.

    ``x`` is either one observed series or a :class:`ScenarioSpec`; in the
    latter case one realization per seed is decomposed and scores are
    averaged. For an observed series the seeds play no role.
    """
    data = _series(x, spec.seeds)
    grid = spec.grid()
    if spec.budget < len(grid):
        raise ConfigurationError(f"budget {spec.budget} is smaller than the grid ({len(grid)} points)")
    trace: List[TraceEntry] = []
    cache: Dict[str, float] = {}

    def evaluate(point):
        key = repr(sorted((k, float(v) if _is_number(v) else v) for k, v in point.items()))
        if key in cache:
            return cache[key]
        h = apply_point(spec.base, point)
        reports, scores, error = [], [], None
        for series in data:
            try:
                res = decompose(series, h, spec.optimizer)
                reports.append(res.diagnostics)
                scores.append(stationarity_score(res.diagnostics, spec.objective_weights, res.mean))
            except DualSignalError as exc:
                reports.append(None)
                scores.append(math.inf)
                error = f"{type(exc).__name__}: {exc}"
        score = float(np.mean(scores))
        trace.append(TraceEntry(len(trace), h, dict(point), score, tuple(reports), error))
        cache[key] = score
        return score

    for point in grid:
        evaluate(point)

    bounds = spec.bounds()
    remaining = spec.budget - len(trace)
    if spec.method != "grid" and bounds and remaining > 0:
        start = min(trace, key=_rank).point
        keys = [k for k in bounds if _is_number(start.get(k))]
        if keys:
            lo = np.log([bounds[k][0] for k in keys])
            hi = np.log([bounds[k][1] for k in keys])
            z0 = np.log([float(start[k]) for k in keys])

            def objective(z):
                if len(trace) >= spec.budget:
                    return math.inf
                z = np.clip(z, lo, hi)
                point = dict(start)
                point.update({k: float(v) for k, v in zip(keys, np.exp(z))})
                point.update({k: min(max(point[k], bounds[k][0]), bounds[k][1]) for k in keys})
                s = evaluate(point)
                return s if math.isfinite(s) else 1e300

            scipy_minimize(
                objective,
                z0,
                method="Nelder-Mead",
                bounds=list(zip(lo, hi)),
                options={"maxfev": remaining, "xatol": 1e-3, "fatol": 1e-6, "initial_simplex": _simplex(z0, lo, hi)},
            )

    ordered = tuple(sorted(trace, key=_rank))
    best = ordered[0]
    if not math.isfinite(best.score):
        raise TuningError("every tuning evaluation failed", ordered)
    return TuningResult(best.h, best.score, ordered)


def _simplex(z0, lo, hi):
    """Initial simplex stepping a quarter of each log-range, away from the nearer bound."""
    pts = [z0]
    for i in range(z0.size):
        p = z0.copy()
        step = 0.25 * (hi[i] - lo[i])
        p[i] = p[i] + step if p[i] + step <= hi[i] else p[i] - step
        pts.append(p)
    return np.array(pts)
