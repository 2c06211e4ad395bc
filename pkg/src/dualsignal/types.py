"""Shared domain types, validation and difference operators.

Every array handed out by these types is a read-only float64 numpy array, so
instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

MIN_LENGTH = 3

MODES = ("sequential", "joint")
FIT_KINDS = ("rmse", "mse", "mae", "sse", "maxse", "maxae")
REG_KINDS = ("mae", "rmse")
Z_MODES = ("preceding", "max_of_both")
WEIGHT_KINDS = ("none", "linear", "transformed", "binary")
ALIGNMENTS = ("endpoint", "span")


class DualSignalError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(DualSignalError, ValueError):
    """Input data violates a structural precondition (length, finiteness)."""


class DegenerateInputError(DualSignalError, ValueError):
    """Input is well formed but makes the computation undefined."""


class ConfigurationError(DualSignalError, ValueError):
    """Hyperparameters or options are invalid."""


class OutOfDomainError(DualSignalError, ValueError):
    """A query point lies outside the domain of a fitted object."""


class TuningError(DualSignalError, RuntimeError):
    """Every tuning evaluation failed."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


def as_series(values, name="series", min_length=1) -> np.ndarray:
    """Coerce ``values`` to a read-only 1-D float64 array and validate it."""
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise InvalidInputError(f"{name} needs at least {min_length} values, got {arr.size}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        # reports are 1-based
        raise InvalidInputError(
            f"{name} contains non-finite values at t={', '.join(str(i + 1) for i in bad[:10])}"
        )
    arr.setflags(write=False)
    return arr


def first_diff(x) -> np.ndarray:
    """Consecutive differences ``x[i+1] - x[i]``."""
    x = as_series(x, "x", min_length=2)
    return np.diff(x)


def second_diff(x) -> np.ndarray:
    """Second differences ``x[i+2] - 2*x[i+1] + x[i]``."""
    x = as_series(x, "x", min_length=3)
    return x[2:] - 2.0 * x[1:-1] + x[:-2]


def moving_range(x) -> np.ndarray:
    """Absolute consecutive differences (the SPC moving range)."""
    return np.abs(first_diff(x))


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly spaced real-valued observations; the index is implicit."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", as_series(self.values, "TimeSeries", MIN_LENGTH))

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class DualSignal:
    """Mean and (non-negative) dispersion series of equal length."""

    mean: np.ndarray
    dispersion: np.ndarray

    def __post_init__(self):
        mean = as_series(self.mean, "mean")
        disp = as_series(self.dispersion, "dispersion")
        if mean.size != disp.size:
            raise InvalidInputError(
                f"mean and dispersion lengths differ ({mean.size} vs {disp.size})"
            )
        if np.any(disp < 0):
            raise InvalidInputError("dispersion must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "dispersion", disp)

    def __len__(self):
        return self.mean.size


@dataclass(frozen=True)
class NoiseSeries:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", as_series(self.values, "noise"))

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class WeightScheme:
    """Mapping from SPC p-values to regularization weights.

    ``kind`` is one of ``none``, ``linear``, ``transformed`` (uses ``k`` and
    ``m``) or ``binary`` (uses the cutoff carried by :class:`Hyperparameters`).
    """

    kind: str = "binary"
    k: float = 9.0
    m: float = 2.0

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ConfigurationError(f"unknown weight scheme {self.kind!r}; expected one of {WEIGHT_KINDS}")
        if self.kind == "transformed" and not (self.k > 0 and self.m > 0):
            raise ConfigurationError(f"transformed weights need k > 0 and m > 0, got k={self.k}, m={self.m}")

    def to_dict(self):
        if self.kind == "transformed":
            return {"kind": self.kind, "k": self.k, "m": self.m}
        return {"kind": self.kind}

    @classmethod
    def from_value(cls, value) -> "WeightScheme":
        if isinstance(value, WeightScheme):
            return value
        if isinstance(value, str):
            return cls(kind=value)
        if isinstance(value, dict):
            return cls(**value)
        raise ConfigurationError(f"cannot interpret weight scheme {value!r}")


@dataclass(frozen=True)
class BetaRule:
    """Either keep the configured β multipliers or estimate them from the data."""

    kind: str = "fixed"
    c_beta: float = 25.0

    def __post_init__(self):
        if self.kind not in ("fixed", "estimated"):
            raise ConfigurationError(f"beta rule must be 'fixed' or 'estimated', got {self.kind!r}")
        if self.kind == "estimated" and not self.c_beta > 0:
            raise ConfigurationError(f"C_beta must be positive, got {self.c_beta}")

    def to_dict(self):
        if self.kind == "estimated":
            return {"kind": self.kind, "c_beta": self.c_beta}
        return {"kind": self.kind}

    @classmethod
    def from_value(cls, value) -> "BetaRule":
        if isinstance(value, BetaRule):
            return value
        if isinstance(value, str):
            return cls(kind=value)
        if isinstance(value, dict):
            return cls(**value)
        raise ConfigurationError(f"cannot interpret beta rule {value!r}")


@dataclass(frozen=True)
class Hyperparameters:
    """The complete hyperparameter vector of a decomposition.

    ``huber_delta`` and ``s_floor`` default to ``None``, meaning "scale to the
    series" (see :class:`dualsignal.optimizer.OptimizerConfig`).
    """

    mode: str = "sequential"
    beta_mean: float = 1.0
    beta_disp: float = 1.0
    gamma_mean: float = 0.5
    gamma_disp: float = 0.5
    theta: float = 1.0
    spc_window: int = 7
    p_cutoff: float = 0.0025
    weight_scheme: WeightScheme = field(default_factory=WeightScheme)
    fit_kind: str = "rmse"
    reg_kind: str = "mae"
    z_mode: str = "max_of_both"
    beta_rule: BetaRule = field(default_factory=BetaRule)
    disp_weighting: bool = True
    huber_delta: Optional[float] = None
    s_floor: Optional[float] = None
    weight_alignment: str = "endpoint"

    def __post_init__(self):
        object.__setattr__(self, "weight_scheme", WeightScheme.from_value(self.weight_scheme))
        object.__setattr__(self, "beta_rule", BetaRule.from_value(self.beta_rule))
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.fit_kind not in FIT_KINDS:
            raise ConfigurationError(f"fit_kind must be one of {FIT_KINDS}, got {self.fit_kind!r}")
        if self.reg_kind not in REG_KINDS:
            raise ConfigurationError(f"reg_kind must be one of {REG_KINDS}, got {self.reg_kind!r}")
        if self.weight_alignment not in ALIGNMENTS:
            raise ConfigurationError(f"weight_alignment must be one of {ALIGNMENTS}, got {self.weight_alignment!r}")
        if self.z_mode not in Z_MODES:
            raise ConfigurationError(f"z_mode must be one of {Z_MODES}, got {self.z_mode!r}")
        for name in ("beta_mean", "beta_disp", "gamma_mean", "gamma_disp", "theta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ConfigurationError(f"{name} must be finite and non-negative, got {value}")
        if int(self.spc_window) != self.spc_window or self.spc_window < 2:
            raise ConfigurationError(f"spc_window must be an integer >= 2, got {self.spc_window}")
        object.__setattr__(self, "spc_window", int(self.spc_window))
        if not 0 < self.p_cutoff < 1:
            raise ConfigurationError(f"p_cutoff must lie in (0, 1), got {self.p_cutoff}")
        for name in ("huber_delta", "s_floor"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value}")

    def replace(self, **changes) -> "Hyperparameters":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "beta_mean": self.beta_mean,
            "beta_disp": self.beta_disp,
            "gamma_mean": self.gamma_mean,
            "gamma_disp": self.gamma_disp,
            "theta": self.theta,
            "spc_window": self.spc_window,
            "p_cutoff": self.p_cutoff,
            "weight_scheme": self.weight_scheme.to_dict(),
            "fit_kind": self.fit_kind,
            "reg_kind": self.reg_kind,
            "z_mode": self.z_mode,
            "beta_rule": self.beta_rule.to_dict(),
            "disp_weighting": self.disp_weighting,
            "huber_delta": self.huber_delta,
            "s_floor": self.s_floor,
            "weight_alignment": self.weight_alignment,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparameters":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown hyperparameter keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class DecompositionResult:
    """Outcome of one decomposition run.

    ``weights`` are the regularization weights used for the mean signal;
    ``disp_weights`` those used for the dispersion signal (all ones when
    dispersion weighting is disabled).
    """

    signal: DualSignal
    noise: NoiseSeries
    weights: np.ndarray
    loss_value: float
    diagnostics: object
    converged: bool = True
    iterations: int = 0
    hyperparameters: Optional[Hyperparameters] = None
    loss: Optional[dict] = None
    disp_weights: Optional[np.ndarray] = None
    s_floor: float = 0.0

    @property
    def mean(self) -> np.ndarray:
        return self.signal.mean

    @property
    def dispersion(self) -> np.ndarray:
        return self.signal.dispersion


def check_same_length(*arrays: Sequence, names=None):
    sizes = [len(a) for a in arrays]
    if len(set(sizes)) > 1:
        label = ", ".join(f"{n}={s}" for n, s in zip(names or range(len(sizes)), sizes))
        raise InvalidInputError(f"length mismatch: {label}")
