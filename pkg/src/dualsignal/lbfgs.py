"""Limited-memory BFGS with a backtracking (Armijo) line search.

Every accepted step satisfies the sufficient-decrease condition, so the
objective never increases between iterates and the last iterate is always
the best one seen.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

ARMIJO_C1 = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str
    history: list


def _two_loop(g, s_hist, y_hist, rho_hist):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    s, y = s_hist[-1], y_hist[-1]
    q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def minimize(
    fun_grad: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x0: np.ndarray,
    memory: int = 10,
    max_iterations: int = 5000,
    rel_tolerance: float = 1e-8,
    patience: int = 3,
    initial_step: float = 1.0,
    gtol: float = 0.0,
    record_history: bool = False,
) -> MinimizeResult:
    """Minimize a smooth function given its value and gradient.

    Stops once ``|f_k - f_{k+1}| / max(1, |f_{k+1}|) < rel_tolerance`` for
    ``patience`` consecutive iterations, when the gradient max-norm drops to
    ``gtol``, when no descent is possible along the steepest-descent
    direction, or after ``max_iterations``.

    ``initial_step`` bounds the length of the very first (steepest-descent)
    step, which should be on the scale of the variables.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    s_hist: deque = deque(maxlen=memory)
    y_hist: deque = deque(maxlen=memory)
    rho_hist: deque = deque(maxlen=memory)
    history = [f] if record_history else []
    calm = 0
    message = "maximum iterations reached"
    converged = False
    k = 0
    for k in range(1, max_iterations + 1):
        if np.max(np.abs(g)) <= gtol:
            converged, message = True, "gradient below tolerance"
            k -= 1
            break
        if s_hist:
            d = _two_loop(g, s_hist, y_hist, rho_hist)
            step = 1.0
        else:
            d = -g
            step = min(1.0, initial_step / max(np.linalg.norm(g), 1e-300))
        slope = float(np.dot(g, d))
        if not slope < 0:
            s_hist.clear(), y_hist.clear(), rho_hist.clear()
            d = -g
            slope = -float(np.dot(g, g))
            step = min(1.0, initial_step / max(np.linalg.norm(g), 1e-300))
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            x_new = x + step * d
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + ARMIJO_C1 * step * slope:
                accepted = True
                break
            step *= BACKTRACK
        if not accepted:
            if s_hist:
                # quasi-Newton direction failed: retry from steepest descent
                s_hist.clear(), y_hist.clear(), rho_hist.clear()
                continue
            converged, message = True, "no further descent possible"
            k -= 1
            break
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
        rel = abs(f - f_new) / max(1.0, abs(f_new))
        x, f, g = x_new, f_new, g_new
        if record_history:
            history.append(f)
        calm = calm + 1 if rel < rel_tolerance else 0
        if calm >= patience:
            converged, message = True, "relative change below tolerance"
            break
    return MinimizeResult(x, float(f), g, k, converged, message, history)
