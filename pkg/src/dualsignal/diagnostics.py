"""Noise isolation and stationarity/whiteness diagnostics.

The statistical tests are implemented directly on numpy: the augmented
Dickey-Fuller regression is an ordinary least-squares fit, and its p-value
is interpolated from Fuller's tabulated constant-only distribution of the
tau statistic.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from .types import (
    DegenerateInputError,
    DualSignal,
    InvalidInputError,
    NoiseSeries,
    as_series,
    check_same_length,
)

# Quantiles of the Dickey-Fuller tau statistic, constant and no trend
# (Fuller 1976, Table 8.5.2). Rows are sample sizes; math.inf is asymptotic.
_DF_PROBS = np.array([0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99])
_DF_SIZES = np.array([25, 50, 100, 250, 500, math.inf])
_DF_TAU = np.array(
    [
        [-3.75, -3.33, -3.00, -2.62, -0.37, 0.00, 0.34, 0.72],
        [-3.58, -3.22, -2.93, -2.60, -0.40, -0.03, 0.29, 0.66],
        [-3.51, -3.17, -2.89, -2.58, -0.42, -0.05, 0.26, 0.63],
        [-3.46, -3.14, -2.88, -2.57, -0.42, -0.06, 0.24, 0.62],
        [-3.44, -3.13, -2.87, -2.57, -0.43, -0.07, 0.24, 0.61],
        [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60],
    ]
)
ADF_P_MIN = 0.001
ADF_P_MAX = 0.999
ADF_PRUNE_T = 1.645


@dataclass(frozen=True)
class ADFResult:
    statistic: float
    p_value: float
    lag: int
    nobs: int
    p_bounded: bool = False

    def __iter__(self):
        return iter((self.statistic, self.p_value, self.lag))


@dataclass(frozen=True)
class DiagnosticsReport:
    adf_statistic: float
    adf_p: float
    adf_lag: int
    lb_statistic: float
    lb_p: float
    lb_lags: int
    rolling_mean_drift: float
    rolling_std_drift: float
    kl_to_standard_normal: float
    noise_mean: float
    noise_std: float
    corr_noise_mean: float
    corr_noise_disp: float
    acf: Tuple[float, ...] = ()
    adf_p_bounded: bool = False
    notes: Tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["acf"] = list(self.acf)
        d["notes"] = list(self.notes)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosticsReport":
        data = dict(data)
        data["acf"] = tuple(data.get("acf", ()))
        data["notes"] = tuple(data.get("notes", ()))
        return cls(**data)


def extract_noise(x, signal: DualSignal, s_floor: float = 0.0) -> NoiseSeries:
    """Standardized residuals ``(x - M) / max(S, s_floor)``."""
    x = as_series(x, "x")
    check_same_length(x, signal.mean, names=("x", "signal"))
    denom = np.maximum(signal.dispersion, s_floor)
    if np.any(denom <= 0):
        raise DegenerateInputError("dispersion must be positive (or s_floor > 0) to isolate noise")
    return NoiseSeries((x - signal.mean) / denom)


def autocorrelation(series, k: int) -> float:
    """Lag-``k`` sample autocorrelation with the full-sample denominator."""
    x = as_series(series, "series")
    if not 1 <= k < x.size:
        raise InvalidInputError(f"lag must satisfy 1 <= k < T={x.size}, got {k}")
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0.0:
        raise DegenerateInputError("autocorrelation of a constant series is undefined")
    return float(np.dot(xc[:-k], xc[k:]) / denom)


def acf(series, nlags: int) -> np.ndarray:
    return np.array([autocorrelation(series, k) for k in range(1, nlags + 1)])


def ljung_box(series, lags: int) -> Tuple[float, float]:
    """Ljung-Box portmanteau statistic ``Q`` and its chi-square p-value."""
    x = as_series(series, "series")
    T = x.size
    if not 1 <= lags < T:
        raise InvalidInputError(f"Ljung-Box lags must satisfy 1 <= lags < T={T}, got {lags}")
    r = acf(x, lags)
    k = np.arange(1, lags + 1)
    q = float(T * (T + 2) * np.sum(r * r / (T - k)))
    return q, float(stats.chi2.sf(q, lags))


def default_lb_lags(T: int) -> int:
    return max(1, min(10, T // 5))


def _adf_regression(y: np.ndarray, p: int):
    dy = np.diff(y)
    n = dy.size - p
    cols = [np.ones(n), y[p:-1]]
    for i in range(1, p + 1):
        cols.append(dy[p - i : dy.size - i])
    X = np.column_stack(cols)
    target = dy[p:]
    beta, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
    if rank < X.shape[1]:
        raise DegenerateInputError("ADF regression is singular (constant or collinear series)")
    resid = target - X @ beta
    dof = n - X.shape[1]
    if dof <= 0:
        raise InvalidInputError("too few observations for the ADF regression")
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    if se[1] == 0 or not np.all(np.isfinite(se)):
        raise DegenerateInputError("ADF regression has zero residual variance")
    return beta / se, n


def adf_pvalue(tau: float, nobs: int) -> Tuple[float, bool]:
    """Interpolated p-value for a constant-only ADF statistic.

    Quantiles are interpolated in ``1/n`` between tabulated sample sizes, then
    the logit of the probability is interpolated linearly in tau (log-linear
    in each tail), extrapolated from the end segments, and clamped.
    """
    inv = np.where(np.isinf(_DF_SIZES), 0.0, 1.0 / np.where(np.isinf(_DF_SIZES), 1.0, _DF_SIZES))
    target = 1.0 / max(nobs, _DF_SIZES[0])
    # inv is decreasing; np.interp wants increasing abscissae
    row = np.array([np.interp(target, inv[::-1], _DF_TAU[::-1, j]) for j in range(_DF_PROBS.size)])
    logit = np.log(_DF_PROBS / (1 - _DF_PROBS))
    if tau <= row[0]:
        slope = (logit[1] - logit[0]) / (row[1] - row[0])
        lp = logit[0] + slope * (tau - row[0])
    elif tau >= row[-1]:
        slope = (logit[-1] - logit[-2]) / (row[-1] - row[-2])
        lp = logit[-1] + slope * (tau - row[-1])
    else:
        lp = np.interp(tau, row, logit)
    p = 1.0 / (1.0 + math.exp(-lp))
    bounded = not ADF_P_MIN < p < ADF_P_MAX
    return float(min(max(p, ADF_P_MIN), ADF_P_MAX)), bounded


def default_adf_maxlag(T: int) -> int:
    return int(math.floor(12 * (T / 100.0) ** 0.25))


def adf_test(series, max_lag: Optional[int] = None, autolag: bool = True) -> ADFResult:
    """Augmented Dickey-Fuller unit-root test with a constant and no trend.

    With ``autolag`` the lag order starts at ``max_lag`` (default
    ``floor(12 * (T/100)^0.25)``) and the longest lag is dropped while its
    t-ratio is below 1.645 in absolute value. Without it, ``max_lag`` lags are
    used as given.
    """
    y = as_series(series, "series")
    T = y.size
    if max_lag is None:
        max_lag = default_adf_maxlag(T)
        # keep the regression well determined on short series
        max_lag = min(max_lag, max(0, (T - 20) // 2))
    if max_lag < 0:
        raise InvalidInputError("max_lag must be non-negative")
    if T < 20 + max_lag:
        raise InvalidInputError(f"ADF needs at least {20 + max_lag} observations, got {T}")
    if np.ptp(y) == 0:
        raise DegenerateInputError("ADF test is undefined for a constant series")
    p = max_lag
    tvals, nobs = _adf_regression(y, p)
    if autolag:
        while p > 0 and abs(tvals[-1]) < ADF_PRUNE_T:
            p -= 1
            tvals, nobs = _adf_regression(y, p)
    tau = float(tvals[1])
    pval, bounded = adf_pvalue(tau, T)
    return ADFResult(tau, pval, p, nobs, bounded)


def rolling_stats(series, window: int):
    """Sliding-window mean and standard deviation with their normalized drifts.

    Drift is the range (max - min) of the rolling statistic divided by the
    overall standard deviation; a constant series has zero drift.

    Returns:
        ``(rolling_mean, rolling_std, mean_drift, std_drift)``
    """
    x = as_series(series, "series")
    if window < 1 or x.size < 2 * window:
        raise InvalidInputError(f"window {window} too large for series of length {x.size} (need T >= 2*window)")
    view = np.lib.stride_tricks.sliding_window_view(x, window)
    rmean = view.mean(axis=1)
    rstd = view.std(axis=1)
    overall = float(x.std())
    if overall == 0.0:
        return rmean, rstd, 0.0, 0.0
    return rmean, rstd, float(np.ptp(rmean) / overall), float(np.ptp(rstd) / overall)


def kl_to_standard_normal(series) -> float:
    """KL divergence of the moment-matched Gaussian from N(0, 1)."""
    x = as_series(series, "series", min_length=2)
    mu = float(x.mean())
    var = float(x.var())
    if var <= 0.0:
        raise DegenerateInputError("KL divergence needs non-zero variance")
    return max(0.0, 0.5 * (var + mu * mu - 1.0 - math.log(var)))


def _abs_corr(a: np.ndarray, b: np.ndarray) -> float:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    return float(abs(np.corrcoef(a, b)[0, 1]))


def diagnose(
    noise,
    signal: Optional[DualSignal] = None,
    lb_lags: Optional[int] = None,
    adf_max_lag: Optional[int] = None,
    rolling_window: Optional[int] = None,
) -> DiagnosticsReport:
    """Run every noise diagnostic, recording undefined ones as ``nan`` with a note."""
    eps = noise.values if isinstance(noise, NoiseSeries) else as_series(noise, "noise")
    T = eps.size
    notes: List[str] = []
    nan = float("nan")

    lb_lags = default_lb_lags(T) if lb_lags is None else lb_lags
    try:
        adf = adf_test(eps, adf_max_lag)
        adf_stat, adf_p, adf_lag, bounded = adf.statistic, adf.p_value, adf.lag, adf.p_bounded
    except (DegenerateInputError, InvalidInputError) as exc:
        adf_stat, adf_p, adf_lag, bounded = nan, nan, 0, False
        notes.append(f"adf: {exc}")
    try:
        lb_q, lb_p = ljung_box(eps, lb_lags)
        acf_vals = tuple(float(v) for v in acf(eps, lb_lags))
    except (DegenerateInputError, InvalidInputError) as exc:
        lb_q, lb_p, acf_vals = nan, nan, ()
        notes.append(f"ljung-box: {exc}")
    window = rolling_window or max(2, T // 10)
    try:
        _, _, mean_drift, std_drift = rolling_stats(eps, window)
    except InvalidInputError as exc:
        mean_drift = std_drift = nan
        notes.append(f"rolling: {exc}")
    try:
        kl = kl_to_standard_normal(eps)
    except DegenerateInputError as exc:
        kl = nan
        notes.append(f"kl: {exc}")
    corr_m = corr_s = 0.0
    if signal is not None:
        corr_m = _abs_corr(eps, signal.mean)
        corr_s = _abs_corr(eps, signal.dispersion)
    return DiagnosticsReport(
        adf_statistic=float(adf_stat),
        adf_p=float(adf_p),
        adf_lag=int(adf_lag),
        lb_statistic=float(lb_q),
        lb_p=float(lb_p),
        lb_lags=int(lb_lags),
        rolling_mean_drift=float(mean_drift),
        rolling_std_drift=float(std_drift),
        kl_to_standard_normal=float(kl),
        noise_mean=float(eps.mean()),
        noise_std=float(eps.std()),
        corr_noise_mean=corr_m,
        corr_noise_disp=corr_s,
        acf=acf_vals,
        adf_p_bounded=bounded,
        notes=tuple(notes),
    )
