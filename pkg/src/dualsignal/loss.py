"""Exact (non-smoothed) loss functionals for mean and dispersion signals.

The composed losses are ``fitting + beta * regularization + gamma * smoothing``
where regularization penalizes weighted first differences and smoothing
penalizes weighted absolute second differences. The optimizer works on a
smoothed surrogate; these functions give the values that get reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .types import (
    FIT_KINDS,
    REG_KINDS,
    ALIGNMENTS,
    ConfigurationError,
    Hyperparameters,
    InvalidInputError,
    as_series,
    check_same_length,
)

# Pairwise compatibility of metrics by order (O) and normalization (N),
# keyed on the below-diagonal (row, column) cells of the published table.
_TABLE = {
    ("mse", "rmse"): (False, False),
    ("mae", "rmse"): (True, False),
    ("mae", "mse"): (False, True),
    ("sse", "rmse"): (False, False),
    ("sse", "mse"): (True, False),
    ("sse", "mae"): (False, False),
    ("maxse", "rmse"): (False, True),
    ("maxse", "mse"): (True, True),
    ("maxse", "mae"): (False, True),
    ("maxse", "sse"): (True, False),
    ("maxae", "rmse"): (True, True),
    ("maxae", "mse"): (False, True),
    ("maxae", "mae"): (True, True),
    ("maxae", "sse"): (False, False),
    ("maxae", "maxse"): (False, True),
}


@dataclass(frozen=True)
class Compatibility:
    order_match: bool
    normalization_match: bool

    @property
    def compatible(self) -> bool:
        return self.order_match and self.normalization_match


def compatibility(a: str, b: str) -> Compatibility:
    """Look up whether two metrics agree in order and normalization."""
    for kind in (a, b):
        if kind not in FIT_KINDS:
            raise ConfigurationError(f"unknown metric {kind!r}; expected one of {FIT_KINDS}")
    if a == b:
        return Compatibility(True, True)
    cell = _TABLE.get((a, b)) or _TABLE[(b, a)]
    return Compatibility(*cell)


@dataclass(frozen=True)
class LossBreakdown:
    fitting: float
    regularization: float
    smoothing: float
    beta: float
    gamma: float
    warnings: Tuple[str, ...] = field(default=())

    @property
    def total(self) -> float:
        return self.fitting + self.beta * self.regularization + self.gamma * self.smoothing

    def to_dict(self) -> dict:
        return {
            "fitting": self.fitting,
            "regularization": self.regularization,
            "smoothing": self.smoothing,
            "beta": self.beta,
            "gamma": self.gamma,
            "total": self.total,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class JointLoss:
    mean: LossBreakdown
    disp: LossBreakdown
    theta: float

    @property
    def total(self) -> float:
        return self.mean.total + self.theta * self.disp.total

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.to_dict(),
            "disp": self.disp.to_dict(),
            "theta": self.theta,
            "total": self.total,
        }


def fitting_metric(x, m, kind: str = "rmse") -> float:
    x = as_series(x, "x")
    m = as_series(m, "m")
    check_same_length(x, m, names=("x", "m"))
    r = x - m
    if kind == "rmse":
        return float(np.sqrt(np.mean(r * r)))
    if kind == "mse":
        return float(np.mean(r * r))
    if kind == "mae":
        return float(np.mean(np.abs(r)))
    if kind == "sse":
        return float(np.sum(r * r))
    if kind == "maxse":
        return float(np.max(r * r))
    if kind == "maxae":
        return float(np.max(np.abs(r)))
    raise ConfigurationError(f"unknown fitting metric {kind!r}; expected one of {FIT_KINDS}")


def _weights(w, T):
    if w is None:
        return np.ones(T)
    w = np.asarray(w, dtype=float)
    if w.shape != (T,):
        raise InvalidInputError(f"weights must have length {T}, got shape {w.shape}")
    return w


def term_weights(w, order: int, alignment: str = "endpoint") -> np.ndarray:
    """Weights of the ``order``-th difference terms built from point weights ``w``.

    ``endpoint`` gives the term ending at ``t`` the weight ``w[t]``; ``span``
    gives it the smallest weight among the points it involves, so a point
    with zero weight is released from every term that touches it.
    """
    w = np.asarray(w, dtype=float)
    if alignment == "endpoint":
        return w[order:]
    if alignment == "span":
        return np.lib.stride_tricks.sliding_window_view(w, order + 1).min(axis=1)
    raise ConfigurationError(f"weight alignment must be one of {ALIGNMENTS}, got {alignment!r}")


def regularization(m, w=None, kind: str = "mae", alignment: str = "endpoint") -> float:
    """Weighted mean absolute (``mae``) or root-mean-square (``rmse``) first difference.

    With the default alignment ``w[t]`` weighs ``m[t] - m[t-1]`` and ``w[0]``
    is unused.
    """
    m = as_series(m, "m", min_length=2)
    tw = term_weights(_weights(w, m.size), 1, alignment)
    d = np.diff(m)
    if kind == "mae":
        return float(np.sum(tw * np.abs(d)) / (m.size - 1))
    if kind == "rmse":
        return float(np.sqrt(np.sum(tw * d * d) / (m.size - 1)))
    raise ConfigurationError(f"unknown regularization kind {kind!r}; expected one of {REG_KINDS}")


def smoothing(m, w=None, alignment: str = "endpoint") -> float:
    """Weighted mean absolute second difference; by default ``w[t]`` weighs the one ending at ``t``."""
    m = as_series(m, "m", min_length=3)
    tw = term_weights(_weights(w, m.size), 2, alignment)
    d2 = m[2:] - 2.0 * m[1:-1] + m[:-2]
    return float(np.sum(tw * np.abs(d2)) / (m.size - 2))


def _compose(target, signal, w, beta, gamma, fit_kind, reg_kind, alignment) -> LossBreakdown:
    if beta < 0 or gamma < 0:
        raise ConfigurationError("beta and gamma must be non-negative")
    warnings = ()
    compat = compatibility(fit_kind, reg_kind)
    if not compat.compatible:
        warnings = (
            f"fitting metric {fit_kind} and regularization {reg_kind} differ in "
            + " and ".join(
                name
                for name, ok in (("order", compat.order_match), ("normalization", compat.normalization_match))
                if not ok
            ),
        )
    return LossBreakdown(
        fitting=fitting_metric(target, signal, fit_kind),
        regularization=regularization(signal, w, reg_kind, alignment),
        smoothing=smoothing(signal, w, alignment),
        beta=float(beta),
        gamma=float(gamma),
        warnings=warnings,
    )


def loss_mean(
    x, m, w=None, beta_mean=0.0, gamma_mean=0.0, fit_kind="rmse", reg_kind="mae", alignment="endpoint"
) -> LossBreakdown:
    x = as_series(x, "x", min_length=3)
    m = as_series(m, "m", min_length=3)
    check_same_length(x, m, names=("x", "m"))
    return _compose(x, m, w, beta_mean, gamma_mean, fit_kind, reg_kind, alignment)


def loss_disp(
    r_abs, s, w=None, beta_disp=0.0, gamma_disp=0.0, fit_kind="rmse", reg_kind="mae", alignment="endpoint"
) -> LossBreakdown:
    """Dispersion loss of ``s`` against absolute residuals ``r_abs``."""
    r_abs = as_series(r_abs, "r_abs", min_length=3)
    s = as_series(s, "s", min_length=3)
    check_same_length(r_abs, s, names=("r_abs", "s"))
    if np.any(r_abs < 0):
        raise InvalidInputError("absolute residuals must be non-negative")
    return _compose(r_abs, s, w, beta_disp, gamma_disp, fit_kind, reg_kind, alignment)


def loss_joint(x, m, s, w, h: Hyperparameters, disp_w: Optional[np.ndarray] = None) -> JointLoss:
    """Mean loss plus ``theta`` times the dispersion loss on ``|x - m|``.

    The dispersion part uses ``disp_w`` when given, otherwise ``w`` if
    ``h.disp_weighting`` is set and unit weights if not.
    """
    x = as_series(x, "x", min_length=3)
    m = as_series(m, "m", min_length=3)
    check_same_length(x, m, s, names=("x", "m", "s"))
    if disp_w is None:
        disp_w = w if h.disp_weighting else None
    lm = loss_mean(x, m, w, h.beta_mean, h.gamma_mean, h.fit_kind, h.reg_kind, h.weight_alignment)
    ls = loss_disp(np.abs(x - m), s, disp_w, h.beta_disp, h.gamma_disp, h.fit_kind, h.reg_kind, h.weight_alignment)
    return JointLoss(lm, ls, float(h.theta))


def mse_identity_terms(x, m, beta: float) -> dict:
    """Moment expansion of ``MSE(x, m) + beta * MSE(diff(m))`` for unit weights.

    Returns the direct loss, the moment form
    ``(mean_x - mean_m)^2 - 2 rho s_x s_m + (1 + 2 beta (1 - r)) s_m^2 + s_x^2``
    (population moments, ``r`` the lag-1 autocorrelation of ``m``) and their
    relative discrepancy, which vanishes like ``1/T``.
    """
    x = as_series(x, "x", min_length=3)
    m = as_series(m, "m", min_length=3)
    check_same_length(x, m, names=("x", "m"))
    direct = float(np.mean((x - m) ** 2) + beta * np.mean(np.diff(m) ** 2))
    xc = x - x.mean()
    mc = m - m.mean()
    sx = np.sqrt(np.mean(xc * xc))
    sm = np.sqrt(np.mean(mc * mc))
    rho = float(np.mean(xc * mc) / (sx * sm))
    r = float(np.sum(mc[:-1] * mc[1:]) / np.sum(mc * mc))
    expansion = float(
        (x.mean() - m.mean()) ** 2 - 2 * rho * sx * sm + (1 + 2 * beta * (1 - r)) * sm**2 + sx**2
    )
    return {
        "direct": direct,
        "expansion": expansion,
        "relative_error": abs(direct - expansion) / abs(direct),
    }
