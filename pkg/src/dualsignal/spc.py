"""Individuals-chart (IX) Z-values, p-values and pattern-preserving weights.

A point far from the local moving average, relative to the local average
moving range, is likely driven by an assignable cause. Its p-value is
turned into a weight in ``[0, 1]`` that scales down the regularization
penalty at that point so the fitted signal may follow it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .types import (
    ConfigurationError,
    Hyperparameters,
    InvalidInputError,
    WeightScheme,
    Z_MODES,
    as_series,
)

D2 = 1.128
P_MIN = 1e-300


@dataclass(frozen=True)
class ZSeries:
    """Absolute Z-values; ``nan`` marks points without a usable window."""

    values: np.ndarray

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def __len__(self):
        return self.values.size


def _window_z(x: np.ndarray, n: int, side: str) -> np.ndarray:
    T = x.size
    z = np.full(T, np.nan)
    mr = np.abs(np.diff(x))  # mr[j] = |x[j+1] - x[j]|
    csum = np.concatenate(([0.0], np.cumsum(x)))
    mcsum = np.concatenate(([0.0], np.cumsum(mr)))
    if side == "preceding":
        idx = np.arange(n, T)
        lo = idx - n  # window x[lo:idx]
    else:
        idx = np.arange(0, T - n)
        lo = idx + 1  # window x[lo:lo+n]
    win_mean = (csum[lo + n] - csum[lo]) / n
    # ranges lying entirely inside the window: mr[lo], ..., mr[lo+n-2]
    mr_mean = (mcsum[lo + n - 1] - mcsum[lo]) / (n - 1)
    num = D2 * np.abs(x[idx] - win_mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = num / mr_mean
    flat = mr_mean <= 0
    vals[flat & (num == 0)] = 0.0
    vals[flat & (num > 0)] = np.inf
    z[idx] = vals
    return z


def z_values(x, n: int, mode: str = "max_of_both") -> ZSeries:
    """Local absolute Z-values of an individuals chart.

    Args:
        x: observations.
        n: number of neighbouring points in each window.
        mode: ``preceding`` uses only the ``n`` points before ``t``;
            ``max_of_both`` takes the larger of the preceding and succeeding
            estimates, or whichever one exists near the edges.
    """
    x = as_series(x, "x")
    if int(n) != n or n < 2:
        raise InvalidInputError(f"window size n must be an integer >= 2, got {n}")
    n = int(n)
    if x.size < n + 2:
        raise InvalidInputError(f"series of length {x.size} is too short for window n={n} (need >= {n + 2})")
    if mode not in Z_MODES:
        raise InvalidInputError(f"z mode must be one of {Z_MODES}, got {mode!r}")
    z = _window_z(x, n, "preceding")
    if mode == "max_of_both":
        zs = _window_z(x, n, "succeeding")
        z = np.fmax(z, zs)
    return ZSeries(z)


def p_values(z) -> np.ndarray:
    """Two-sided normal p-values ``2 * (1 - Phi(|Z|))``; undefined Z gives 1."""
    vals = z.values if isinstance(z, ZSeries) else np.asarray(z, dtype=float)
    if np.any(vals[~np.isnan(vals)] < 0):
        raise InvalidInputError("absolute Z-values must be non-negative")
    # erfc keeps full relative precision in the tail
    p = erfc(np.abs(vals) / np.sqrt(2.0))
    p = np.where(np.isnan(vals), 1.0, p)
    return np.clip(p, P_MIN, 1.0)


def weights(p, scheme="binary", p_cutoff: float = 0.0025) -> np.ndarray:
    """Regularization weights in ``[0, 1]`` from p-values."""
    scheme = WeightScheme.from_value(scheme)
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
        raise InvalidInputError("p-values must lie in (0, 1]")
    if scheme.kind == "none":
        return np.ones_like(p)
    if scheme.kind == "linear":
        return p.copy()
    if scheme.kind == "transformed":
        return -np.expm1(-scheme.k * p**scheme.m)
    if not 0 < p_cutoff < 1:
        raise ConfigurationError(f"p_cutoff must lie in (0, 1), got {p_cutoff}")
    return np.where(p <= p_cutoff, 0.0, 1.0)


def spc_weights(x, h: Hyperparameters):
    """Z-values, p-values and weights of ``x`` under hyperparameters ``h``."""
    z = z_values(x, h.spc_window, h.z_mode)
    p = p_values(z)
    w = weights(p, h.weight_scheme, h.p_cutoff)
    return z, p, w
