"""Sequential and joint dual-signal decomposition by direct minimization.

Absolute values in the penalties are replaced by the pseudo-Huber function
so the objective is continuously differentiable; the minimization is done
with L-BFGS on the mean series ``M`` and an unconstrained parameter ``u``
with ``S = softplus(u) + s_floor``. Reported losses are recomputed with
exact absolute values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import lbfgs
from .diagnostics import diagnose, extract_noise
from .loss import loss_disp, loss_joint, loss_mean, term_weights
from .spc import spc_weights
from .types import (
    ConfigurationError,
    DecompositionResult,
    DegenerateInputError,
    DualSignal,
    Hyperparameters,
    InvalidInputError,
    TimeSeries,
    as_series,
)


@dataclass(frozen=True)
class OptimizerConfig:
    """Numerical settings of the minimizer.

    ``huber_delta`` and ``s_floor`` left as ``None`` resolve to ``1e-3`` and
    ``1e-6`` times the series scale (its standard deviation). Values set on
    :class:`Hyperparameters` take precedence over the ones set here.

    ``continuation`` runs the minimization with progressively smaller
    pseudo-Huber widths, ending at ``huber_delta``.
    """

    max_iterations: int = 5000
    rel_tolerance: float = 1e-8
    huber_delta: Optional[float] = None
    s_floor: Optional[float] = None
    init_window: int = 5
    memory: int = 10
    continuation: Tuple[float, ...] = (100.0, 10.0, 1.0)

    def __post_init__(self):
        if self.max_iterations < 1 or self.rel_tolerance <= 0 or self.init_window < 1 or self.memory < 1:
            raise ConfigurationError("optimizer settings must all be positive")
        for name in ("huber_delta", "s_floor"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigurationError(f"{name} must be positive, got {v}")
        if not self.continuation or any(c < 1 for c in self.continuation) or self.continuation[-1] != 1:
            raise ConfigurationError("continuation factors must be >= 1 and end with 1")


def series_scale(x: np.ndarray) -> float:
    sd = float(np.std(x))
    if sd > 0:
        return sd
    return max(1.0, float(np.max(np.abs(x))))


def smooth_abs(v, delta: float):
    """Pseudo-Huber surrogate ``delta * (sqrt(1 + (v/delta)^2) - 1)`` of ``|v|``."""
    v = np.asarray(v, dtype=float)
    return delta * (np.sqrt(1.0 + (v / delta) ** 2) - 1.0)


def _smooth_abs_grad(v, delta):
    a = v / delta
    root = np.sqrt(1.0 + a * a)
    return delta * (root - 1.0), a / root


def softplus(u):
    return np.logaddexp(0.0, u)


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def inverse_softplus(y):
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    big = y > 30
    # log(expm1(y)) overflows for large y
    out[big] = y[big] + np.log1p(-np.exp(-y[big]))
    out[~big] = np.log(np.expm1(np.maximum(y[~big], 1e-300)))
    return out


def _dT(g):
    """Adjoint of the first difference operator."""
    out = np.empty(g.size + 1)
    out[0] = -g[0]
    out[1:-1] = g[:-1] - g[1:]
    out[-1] = g[-1]
    return out


# -- smoothed loss terms: each returns (value, gradient w.r.t. ``signal``) --


def _fit(target, signal, kind, delta):
    r = signal - target
    T = r.size
    if kind == "rmse":
        val = math.sqrt(float(np.dot(r, r)) / T)
        if val == 0.0:
            return 0.0, np.zeros(T)
        return val, r / (T * val)
    if kind == "mse":
        return float(np.dot(r, r)) / T, 2.0 * r / T
    if kind == "sse":
        return float(np.dot(r, r)), 2.0 * r
    if kind == "mae":
        v, d = _smooth_abs_grad(r, delta)
        return float(v.sum()) / T, d / T
    g = np.zeros(T)
    i = int(np.argmax(np.abs(r)))
    if kind == "maxse":
        g[i] = 2.0 * r[i]
        return float(r[i] ** 2), g
    if kind == "maxae":
        v, d = _smooth_abs_grad(r[i : i + 1], delta)
        g[i] = d[0]
        return float(v[0]), g
    raise ConfigurationError(f"unknown fitting metric {kind!r}")


@dataclass(frozen=True)
class TermWeights:
    """Weights of the first- and second-difference penalty terms."""

    first: np.ndarray
    second: np.ndarray

    @classmethod
    def from_points(cls, w, alignment: str = "endpoint") -> "TermWeights":
        return cls(term_weights(w, 1, alignment), term_weights(w, 2, alignment))


def _reg(signal, tw, kind, delta):
    T = signal.size
    d = np.diff(signal)
    if kind == "mae":
        v, dv = _smooth_abs_grad(d, delta)
        return float(np.dot(tw, v)) / (T - 1), _dT(tw * dv) / (T - 1)
    val = math.sqrt(float(np.dot(tw, d * d)) / (T - 1))
    if val == 0.0:
        return 0.0, np.zeros(T)
    return val, _dT(tw * d) / ((T - 1) * val)


def _smooth(signal, tw, delta):
    T = signal.size
    d2 = signal[2:] - 2.0 * signal[1:-1] + signal[:-2]
    v, dv = _smooth_abs_grad(d2, delta)
    return float(np.dot(tw, v)) / (T - 2), _dT(_dT(tw * dv)) / (T - 2)


def _penalties(signal, tw: TermWeights, beta, gamma, reg_kind, delta):
    f, g = 0.0, np.zeros(signal.size)
    if beta > 0:
        rv, rg = _reg(signal, tw.first, reg_kind, delta)
        f += beta * rv
        g = g + beta * rg
    if gamma > 0:
        sv, sg = _smooth(signal, tw.second, delta)
        f += gamma * sv
        g = g + gamma * sg
    return f, g


def _penalized(target, signal, tw: TermWeights, beta, gamma, fit_kind, reg_kind, delta):
    f, g = _fit(target, signal, fit_kind, delta)
    pf, pg = _penalties(signal, tw, beta, gamma, reg_kind, delta)
    return f + pf, g + pg


def _smooth_residual(x, m, delta):
    """Smooth ``|x - m|`` used as the dispersion target when ``m`` is free."""
    r = x - m
    a = np.sqrt(r * r + delta * delta)
    return a, -r / a


def mean_objective(m, x, w, h: Hyperparameters, delta: float):
    return _penalized(x, m, w, h.beta_mean, h.gamma_mean, h.fit_kind, h.reg_kind, delta)


def disp_objective(u, r_abs, w_disp, h: Hyperparameters, delta: float, s_floor: float):
    s = softplus(u) + s_floor
    f, g = _penalized(r_abs, s, w_disp, h.beta_disp, h.gamma_disp, h.fit_kind, h.reg_kind, delta)
    return f, g * _sigmoid(u)


def joint_objective(params, x, w, w_disp, h: Hyperparameters, delta: float, s_floor: float):
    """Smoothed ``Loss_M + theta * Loss_S`` over ``params = [M, u]``."""
    T = x.size
    m, u = params[:T], params[T:]
    fm, gm = mean_objective(m, x, w, h, delta)
    if h.theta == 0:
        return fm, np.concatenate([gm, np.zeros(T)])
    a, da_dm = _smooth_residual(x, m, delta)
    s = softplus(u) + s_floor
    ft, gt = _fit(a, s, h.fit_kind, delta)
    pf, pg = _penalties(s, w_disp, h.beta_disp, h.gamma_disp, h.reg_kind, delta)
    # the fitting terms depend on (target - signal) only, so d/d(target) = -d/d(signal)
    grad_m = gm - h.theta * gt * da_dm
    grad_u = h.theta * (gt + pg) * _sigmoid(u)
    return fm + h.theta * (ft + pf), np.concatenate([grad_m, grad_u])


def objective_gradient(params, x, w, h: Hyperparameters, cfg: Optional[OptimizerConfig] = None, stage: str = "joint"):
    """Analytic gradient of the smoothed objective.

    ``stage`` is ``joint`` (``params = [M, u]``, length ``2T``), ``mean``
    (``params = M``) or ``disp`` (``params = u``, with ``x`` holding the
    absolute residuals).
    """
    return objective_value_grad(params, x, w, h, cfg, stage)[1]


def objective_value_grad(params, x, w, h: Hyperparameters, cfg: Optional[OptimizerConfig] = None, stage: str = "joint"):
    cfg = cfg or OptimizerConfig()
    x = np.asarray(x, dtype=float)
    w = np.ones(x.size) if w is None else np.asarray(w, dtype=float)
    delta, s_floor = resolve_numerics(x, h, cfg)
    w_disp = TermWeights.from_points(w if h.disp_weighting else np.ones(x.size), h.weight_alignment)
    w = TermWeights.from_points(w, h.weight_alignment)
    params = np.asarray(params, dtype=float)
    if stage == "joint":
        return joint_objective(params, x, w, w_disp, h, delta, s_floor)
    if stage == "mean":
        return mean_objective(params, x, w, h, delta)
    if stage == "disp":
        return disp_objective(params, x, w_disp, h, delta, s_floor)
    raise ConfigurationError(f"unknown stage {stage!r}")


def resolve_numerics(x, h: Hyperparameters, cfg: OptimizerConfig) -> Tuple[float, float]:
    scale = series_scale(np.asarray(x, dtype=float))
    delta = h.huber_delta or cfg.huber_delta or 1e-3 * scale
    s_floor = h.s_floor or cfg.s_floor or 1e-6 * scale
    return float(delta), float(s_floor)


def beta_estimate(x, c_beta: float = 25.0) -> float:
    """Data-driven regularization multiplier.

    ``c_beta * RMSE(x, mean(x)) / (sqrt(T) * mean|diff(x)|)``; invariant to
    shifting and rescaling ``x``.
    """
    x = as_series(x, "x", min_length=2)
    if not c_beta > 0:
        raise ConfigurationError(f"C_beta must be positive, got {c_beta}")
    mad = float(np.mean(np.abs(np.diff(x))))
    if mad == 0.0:
        raise DegenerateInputError("beta estimate is undefined for a constant series")
    rmse = float(np.sqrt(np.mean((x - x.mean()) ** 2)))
    return c_beta * rmse / (math.sqrt(x.size) * mad)


def centered_moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average whose window shrinks symmetrically at the edges."""
    T = x.size
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(T)
    reach = np.minimum(np.minimum(idx, T - 1 - idx), half)
    lo, hi = idx - reach, idx + reach + 1
    return (csum[hi] - csum[lo]) / (hi - lo)


def rolling_std(x: np.ndarray, window: int) -> np.ndarray:
    """Centered rolling (population) standard deviation, shrinking at the edges."""
    T = x.size
    half = max(1, window // 2)
    c1 = np.concatenate(([0.0], np.cumsum(x)))
    c2 = np.concatenate(([0.0], np.cumsum(x * x)))
    idx = np.arange(T)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, T)
    n = hi - lo
    mean = (c1[hi] - c1[lo]) / n
    var = (c2[hi] - c2[lo]) / n - mean * mean
    return np.sqrt(np.maximum(var, 0.0))


def _initial_dispersion(resid: np.ndarray, window: int, s_floor: float) -> np.ndarray:
    s0 = np.maximum(rolling_std(resid, window), s_floor)
    return inverse_softplus(np.maximum(s0 - s_floor, 1e-12 * max(s_floor, 1e-300)))


def resolve_hyperparameters(x: np.ndarray, h: Hyperparameters) -> Hyperparameters:
    """Replace estimated multipliers by their data-driven values."""
    if h.beta_rule.kind == "estimated":
        beta = beta_estimate(x, h.beta_rule.c_beta)
        return h.replace(beta_mean=beta, beta_disp=beta)
    return h


def _validate(x, h: Hyperparameters) -> np.ndarray:
    x = TimeSeries(x).values if not isinstance(x, TimeSeries) else x.values
    need = max(h.spc_window + 2, 3) if h.weight_scheme.kind != "none" else 3
    if x.size < need:
        raise InvalidInputError(f"series of length {x.size} is too short (need >= {need})")
    return x


def _run(fg, x0, cfg: OptimizerConfig, delta: float, scale: float):
    params = x0
    iterations = 0
    converged = False
    for factor in cfg.continuation:
        d = delta * factor
        res = lbfgs.minimize(
            lambda p: fg(p, d),
            params,
            memory=cfg.memory,
            max_iterations=cfg.max_iterations,
            rel_tolerance=cfg.rel_tolerance,
            initial_step=scale,
        )
        params = res.x
        iterations += res.iterations
        converged = res.converged
    return params, iterations, converged


def compute_weights(x: np.ndarray, h: Hyperparameters) -> np.ndarray:
    if h.weight_scheme.kind == "none":
        return np.ones(x.size)
    return spc_weights(x, h)[2]


def _finish(x, m, s, w, w_disp, h, s_floor, loss_value, loss, converged, iterations):
    signal = DualSignal(m, s)
    noise = extract_noise(x, signal, s_floor)
    return DecompositionResult(
        signal=signal,
        noise=noise,
        weights=w,
        loss_value=float(loss_value),
        diagnostics=diagnose(noise, signal),
        converged=converged,
        iterations=iterations,
        hyperparameters=h,
        loss=loss,
        disp_weights=w_disp,
        s_floor=s_floor,
    )


def _fit_dispersion(r_abs, w_disp, h, cfg, delta, s_floor, scale, window):
    u0 = _initial_dispersion(r_abs, window, s_floor)
    fg = lambda u, d: disp_objective(u, r_abs, w_disp, h, d, s_floor)  # noqa: E731
    return _run(fg, u0, cfg, delta, scale)


def decompose_sequential(x, h: Optional[Hyperparameters] = None, cfg: Optional[OptimizerConfig] = None) -> DecompositionResult:
    """Fit the mean signal first, then the dispersion of its residuals."""
    h = h or Hyperparameters(mode="sequential")
    cfg = cfg or OptimizerConfig()
    x = _validate(x, h)
    h = resolve_hyperparameters(x, h)
    offset = float(np.mean(x))
    xc = x - offset  # every term depends on differences or residuals only
    scale = series_scale(x)
    delta, s_floor = resolve_numerics(x, h, cfg)
    w = compute_weights(x, h)
    w_disp = w if h.disp_weighting else np.ones(x.size)
    tw = TermWeights.from_points(w, h.weight_alignment)
    tw_disp = TermWeights.from_points(w_disp, h.weight_alignment)

    m0 = centered_moving_average(xc, cfg.init_window)
    fg_m = lambda m, d: mean_objective(m, xc, tw, h, d)  # noqa: E731
    mc, it_m, conv_m = _run(fg_m, m0, cfg, delta, scale)
    m = mc + offset
    r_abs = np.abs(x - m)
    u, it_s, conv_s = _fit_dispersion(r_abs, tw_disp, h, cfg, delta, s_floor, scale, cfg.init_window)
    s = softplus(u) + s_floor

    lm = loss_mean(x, m, w, h.beta_mean, h.gamma_mean, h.fit_kind, h.reg_kind, h.weight_alignment)
    ls = loss_disp(r_abs, s, w_disp, h.beta_disp, h.gamma_disp, h.fit_kind, h.reg_kind, h.weight_alignment)
    loss = {"mode": "sequential", "mean": lm.to_dict(), "disp": ls.to_dict()}
    return _finish(x, m, s, w, w_disp, h, s_floor, ls.total, loss, conv_m and conv_s, it_m + it_s)


def decompose_joint(
    x,
    h: Optional[Hyperparameters] = None,
    cfg: Optional[OptimizerConfig] = None,
    init: Optional[DualSignal] = None,
) -> DecompositionResult:
    """Fit mean and dispersion simultaneously on ``Loss_M + theta * Loss_S``.

    ``init`` optionally overrides the default warm start.
    """
    h = h or Hyperparameters(mode="joint")
    if not h.theta > 0:
        raise ConfigurationError(f"joint decomposition needs theta > 0, got {h.theta}")
    cfg = cfg or OptimizerConfig()
    x = _validate(x, h)
    h = resolve_hyperparameters(x, h)
    T = x.size
    offset = float(np.mean(x))
    xc = x - offset
    scale = series_scale(x)
    delta, s_floor = resolve_numerics(x, h, cfg)
    w = compute_weights(x, h)
    w_disp = w if h.disp_weighting else np.ones(T)

    if init is not None:
        if len(init) != T:
            raise InvalidInputError("initial signal length differs from the series")
        m0 = init.mean - offset
        u0 = inverse_softplus(np.maximum(init.dispersion - s_floor, 1e-12 * s_floor))
    else:
        m0 = centered_moving_average(xc, cfg.init_window)
        u0 = _initial_dispersion(xc - m0, cfg.init_window, s_floor)
    tw = TermWeights.from_points(w, h.weight_alignment)
    tw_disp = TermWeights.from_points(w_disp, h.weight_alignment)
    fg = lambda p, d: joint_objective(p, xc, tw, tw_disp, h, d, s_floor)  # noqa: E731
    params, iterations, converged = _run(fg, np.concatenate([m0, u0]), cfg, delta, scale)
    m = params[:T] + offset
    s = softplus(params[T:]) + s_floor

    jl = loss_joint(x, m, s, w, h, disp_w=w_disp)
    loss = {"mode": "joint", **jl.to_dict()}
    return _finish(x, m, s, w, w_disp, h, s_floor, jl.total, loss, converged, iterations)


def decompose(x, h: Optional[Hyperparameters] = None, cfg: Optional[OptimizerConfig] = None) -> DecompositionResult:
    """Dispatch on ``h.mode``."""
    h = h or Hyperparameters()
    if h.mode == "joint":
        return decompose_joint(x, h, cfg)
    return decompose_sequential(x, h, cfg)
