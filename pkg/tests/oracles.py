"""Independent brute-force oracles and fixed reference data for the test suite.

Nothing here imports the package under test.
"""

import math

import mpmath

# Fixed reference series (4-decimal literals): a noisy random walk and a
# short noisy sinusoid.
REF_WALK_50 = [
    -0.957, -0.4511, -0.8951, -0.8039, -2.4309, -0.8079, -3.3881, -3.4908, -4.0383, -3.5086,
    -5.6336, -4.33, -3.5201, -4.2012, -3.9433, -5.0636, -6.0664, -5.2622, -4.6358, -6.5246,
    -3.2058, -6.0472, -6.4672, -5.832, -6.753, -5.7791, -7.0085, -4.94, -5.971, -4.6172,
    -4.677, -4.8076, -2.9655, -5.0673, -4.6519, -4.2016, -3.2734, -6.2152, -5.1197, -6.0295,
    -8.585, -7.5004, -8.4992, -10.5456, -8.6577, -8.9514, -8.5945, -9.9059, -9.7091, -8.0216,
]
REF_SINE_30 = [
    0.203, -0.1636, -1.0872, 0.3429, -1.5699, 0.7141, 0.0354, 1.0739, 0.5585, 1.4032,
    -0.674, -0.3499, 1.1855, -1.0902, 0.5888, 1.2354, -1.1787, -1.0843, -1.5503, 1.2407,
    0.1758, 0.0195, -1.4161, -1.4023, 0.5643, -0.2424, -0.0959, 1.1744, -0.7975, 1.3479,
]


def adf_tau(y, lags):
    """Dickey-Fuller t-ratio by explicit normal equations in 40-digit arithmetic."""
    mpmath.mp.dps = 40
    y = [mpmath.mpf(v) for v in y]
    dy = [y[i + 1] - y[i] for i in range(len(y) - 1)]
    rows, target = [], []
    for t in range(lags, len(dy)):
        row = [mpmath.mpf(1), y[t]]
        for i in range(1, lags + 1):
            row.append(dy[t - i])
        rows.append(row)
        target.append(dy[t])
    n, k = len(rows), len(rows[0])
    xtx = mpmath.matrix(k, k)
    xty = mpmath.matrix(k, 1)
    for row, tv in zip(rows, target):
        for a in range(k):
            xty[a] += row[a] * tv
            for b in range(k):
                xtx[a, b] += row[a] * row[b]
    inv = xtx**-1
    beta = inv * xty
    rss = mpmath.mpf(0)
    for row, tv in zip(rows, target):
        fit = sum(row[a] * beta[a] for a in range(k))
        rss += (tv - fit) ** 2
    sigma2 = rss / (n - k)
    return float(beta[1] / mpmath.sqrt(sigma2 * inv[1, 1]))


def autocorr(x, k):
    n = len(x)
    mean = math.fsum(x) / n
    num = math.fsum((x[t] - mean) * (x[t + k] - mean) for t in range(n - k))
    den = math.fsum((v - mean) ** 2 for v in x)
    return num / den


def ljung_box_q(x, lags):
    n = len(x)
    return n * (n + 2) * math.fsum(autocorr(x, k) ** 2 / (n - k) for k in range(1, lags + 1))


def normal_sf2(z):
    """Two-sided normal tail probability via mpmath."""
    mpmath.mp.dps = 50
    return float(mpmath.erfc(mpmath.mpf(z) / mpmath.sqrt(2)))


def finite_difference(f, x, step):
    """Central finite-difference gradient."""
    import numpy as np

    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


# metric compatibility grid (rows below the diagonal), parsed rather than hand-coded
_COMPAT_TEXT = """\
MSE	≠O; ≠N
MAE	✓O; ≠N	≠O; ✓N
SSE	≠O; ≠N	✓O; ≠N	≠O; ≠N
MAXSE	≠O; ✓N	✓O; ✓N	≠O; ✓N	✓O; ≠N
MAXAE	✓O; ✓N	≠O; ✓N	✓O; ✓N	≠O; ≠N	≠O; ✓N"""
_COMPAT_COLUMNS = ["rmse", "mse", "mae", "sse", "maxse", "maxae"]


def _parse_compat():
    table = {}
    for line in _COMPAT_TEXT.splitlines():
        row, *cells = line.split("\t")
        for col, cell in zip(_COMPAT_COLUMNS, cells):
            order, norm = (part.strip() for part in cell.split(";"))
            table[(row.lower(), col)] = (order.startswith("✓"), norm.startswith("✓"))
    return table


COMPATIBILITY = _parse_compat()
