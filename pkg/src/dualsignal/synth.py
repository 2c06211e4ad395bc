"""Synthetic series with known mean, dispersion and noise.

Mean effects add to ``base_mean``; variance effects multiply ``base_sigma``.
Effect windows are 1-based and inclusive. Contributions are accumulated in a
canonical order, so the listing order of effects never changes the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .types import ConfigurationError, InvalidInputError, TimeSeries

PRNG = "numpy.random.PCG64"
NORMAL_METHOD = "ziggurat"

_EFFECT_PARAMS = {
    "outlier": ("t", "magnitude"),
    "mean_shift": ("t_start", "delta"),
    "linear_trend": ("t_start", "t_end", "slope"),
    "cycle": ("t_start", "t_end", "amplitude", "period"),
    "variance_shift": ("t_start", "factor"),
    "variance_trend": ("t_start", "t_end", "factor_end"),
}
_MEAN_EFFECTS = ("outlier", "mean_shift", "linear_trend", "cycle")


@dataclass(frozen=True)
class Effect:
    kind: str
    params: Tuple[Tuple[str, float], ...]

    def __post_init__(self):
        if self.kind not in _EFFECT_PARAMS:
            raise ConfigurationError(f"unknown effect {self.kind!r}; expected one of {sorted(_EFFECT_PARAMS)}")
        names = tuple(k for k, _ in self.params)
        if sorted(names) != sorted(_EFFECT_PARAMS[self.kind]):
            raise ConfigurationError(f"effect {self.kind} needs parameters {_EFFECT_PARAMS[self.kind]}, got {names}")

    def __getitem__(self, key):
        return dict(self.params)[key]

    @classmethod
    def make(cls, kind: str, **params) -> "Effect":
        if kind not in _EFFECT_PARAMS:
            raise ConfigurationError(f"unknown effect {kind!r}; expected one of {sorted(_EFFECT_PARAMS)}")
        order = {name: i for i, name in enumerate(_EFFECT_PARAMS[kind])}
        return cls(kind, tuple(sorted(params.items(), key=lambda kv: order.get(kv[0], len(order)))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **dict(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> "Effect":
        data = dict(data)
        kind = data.pop("kind", None)
        return cls.make(kind, **data)


@dataclass(frozen=True)
class ScenarioSpec:
    T: int = 200
    base_mean: float = 10.0
    base_sigma: float = 1.0
    effects: Tuple[Effect, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "effects", tuple(e if isinstance(e, Effect) else Effect.from_dict(e) for e in self.effects)
        )
        if int(self.T) != self.T or self.T < 3:
            raise InvalidInputError(f"T must be an integer >= 3, got {self.T}")
        if not self.base_sigma > 0:
            raise InvalidInputError(f"base_sigma must be positive, got {self.base_sigma}")
        for e in self.effects:
            self._check(e)

    def _check(self, e: Effect):
        for key in ("t", "t_start", "t_end"):
            if key in dict(e.params):
                t = e[key]
                if int(t) != t or not 1 <= t <= self.T:
                    raise InvalidInputError(f"{e.kind}: {key}={t} outside [1, {self.T}]")
        if "t_end" in dict(e.params) and e["t_end"] < e["t_start"]:
            raise InvalidInputError(f"{e.kind}: t_end precedes t_start")
        for key in ("factor", "factor_end", "period"):
            if key in dict(e.params) and not e[key] > 0:
                raise InvalidInputError(f"{e.kind}: {key} must be positive")

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return ScenarioSpec(self.T, self.base_mean, self.base_sigma, self.effects, seed)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "base_mean": self.base_mean,
            "base_sigma": self.base_sigma,
            "seed": self.seed,
            "effects": [e.to_dict() for e in self.effects],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        unknown = set(data) - {"T", "base_mean", "base_sigma", "seed", "effects"}
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        data = dict(data)
        data["effects"] = tuple(Effect.from_dict(e) for e in data.get("effects", ()))
        return cls(**data)


@dataclass(frozen=True)
class SyntheticSeries:
    x: TimeSeries
    true_mean: np.ndarray
    true_disp: np.ndarray
    true_noise: np.ndarray
    spec: ScenarioSpec
    metadata: Dict[str, str] = field(default_factory=dict)


def _mean_contribution(e: Effect, t: np.ndarray) -> np.ndarray:
    out = np.zeros(t.size)
    if e.kind == "outlier":
        out[t == e["t"]] = e["magnitude"]
    elif e.kind == "mean_shift":
        out[t >= e["t_start"]] = e["delta"]
    elif e.kind == "linear_trend":
        # the level reached at t_end persists afterwards
        out = e["slope"] * (np.clip(t, e["t_start"], e["t_end"]) - e["t_start"])
    elif e.kind == "cycle":
        inside = (t >= e["t_start"]) & (t <= e["t_end"])
        out[inside] = e["amplitude"] * np.sin(2 * np.pi * (t[inside] - e["t_start"]) / e["period"])
    return out


def _disp_factor(e: Effect, t: np.ndarray) -> np.ndarray:
    if e.kind == "variance_shift":
        return np.where(t >= e["t_start"], e["factor"], 1.0)
    span = e["t_end"] - e["t_start"]
    frac = np.ones(t.size) if span == 0 else (np.clip(t, e["t_start"], e["t_end"]) - e["t_start"]) / span
    return np.where(t >= e["t_start"], 1.0 + (e["factor_end"] - 1.0) * frac, 1.0)


def _canonical(effects):
    return sorted(effects, key=lambda e: (e.kind, sorted(e.params)))


def generate(spec: ScenarioSpec) -> SyntheticSeries:
    """Draw one realization ``x = M + S * eps`` of the scenario."""
    t = np.arange(1, spec.T + 1)
    mean = np.full(spec.T, float(spec.base_mean))
    disp = np.full(spec.T, float(spec.base_sigma))
    for e in _canonical(spec.effects):
        if e.kind in _MEAN_EFFECTS:
            mean = mean + _mean_contribution(e, t)
        else:
            disp = disp * _disp_factor(e, t)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noise = rng.standard_normal(spec.T)
    x = mean + disp * noise
    for arr in (mean, disp, noise):
        arr.setflags(write=False)
    meta = {"prng": PRNG, "normal_method": NORMAL_METHOD, "numpy_version": np.__version__, "seed": str(spec.seed)}
    return SyntheticSeries(TimeSeries(x), mean, disp, noise, spec, meta)


def standard_scenarios(T: int = 200, base_mean: float = 10.0, sigma: float = 1.0, seed: int = 0) -> Dict[str, ScenarioSpec]:
    """The canonical suite of seven named scenarios (all of length 200 by default)."""
    half = T // 2 + 1
    E = Effect.make

    def spec(*effects):
        return ScenarioSpec(T, base_mean, sigma, tuple(effects), seed)

    return {
        "outlier": spec(E("outlier", t=T // 2, magnitude=5 * sigma)),
        "mean-shift": spec(E("mean_shift", t_start=half, delta=5 * sigma)),
        "cycle": spec(E("cycle", t_start=T // 4 + 1, t_end=3 * T // 4, amplitude=2 * sigma, period=20)),
        "steady-then-linear-trend": spec(E("linear_trend", t_start=half, t_end=T, slope=0.05 * sigma)),
        "variance-shift": spec(E("variance_shift", t_start=half, factor=3.0)),
        "variance-trend": spec(E("variance_trend", t_start=half, t_end=T, factor_end=3.0)),
        "composite": spec(
            E("outlier", t=round(0.125 * T), magnitude=5 * sigma),
            E("cycle", t_start=round(0.2 * T) + 1, t_end=round(0.4 * T), amplitude=2 * sigma, period=20),
            E("mean_shift", t_start=round(0.5 * T) + 1, delta=5 * sigma),
            E("outlier", t=round(0.6 * T), magnitude=-5 * sigma),
            E("linear_trend", t_start=round(0.7 * T) + 1, t_end=round(0.85 * T), slope=0.05 * sigma),
            E("variance_shift", t_start=round(0.85 * T) + 1, factor=3.0),
        ),
    }
