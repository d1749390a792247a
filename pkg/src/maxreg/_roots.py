"""Inversion of monotone conditional distribution functions."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import brentq

Y_MIN = 1e-8
Y_MAX = 1e12


class InversionError(ArithmeticError):
    """A conditional CDF could not be bracketed or inverted."""

    def __init__(self, message, **state):
        self.state = state
        detail = ", ".join(f"{k}={v!r}" for k, v in state.items())
        super().__init__(f"{message} ({detail})" if detail else message)


def invert_cdf(cdf: Callable[[float], float], q: float, start: float = 1.0) -> float:
    """Smallest ``y`` with ``cdf(y) >= q``, for continuous non-decreasing ``cdf``.

    The bracket grows geometrically from ``start`` until it straddles ``q``
    (bounded to ``[Y_MIN, Y_MAX]``); Brent's method then runs on ``log y``.
    """
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q}")
    start = min(max(float(start), Y_MIN), Y_MAX)

    def f(t):
        return cdf(math.exp(t)) - q

    lo = hi = math.log(start)
    f_lo = f_hi = f(lo)
    step = math.log(2.0)
    log_min, log_max = math.log(Y_MIN), math.log(Y_MAX)
    while f_lo > 0.0:
        if lo <= log_min:
            raise InversionError("cdf above q at lower bracket limit", q=q, y=math.exp(lo), cdf=f_lo + q)
        hi, f_hi = lo, f_lo
        lo = max(lo - step, log_min)
        f_lo = f(lo)
        step *= 2.0
    step = math.log(2.0)
    while f_hi < 0.0:
        if hi >= log_max:
            raise InversionError("cdf below q at upper bracket limit", q=q, y=math.exp(hi), cdf=f_hi + q)
        lo, f_lo = hi, f_hi
        hi = min(hi + step, log_max)
        f_hi = f(hi)
        step *= 2.0
    if f_lo == 0.0:
        return math.exp(lo)
    if f_hi == 0.0:
        return math.exp(hi)
    t = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return math.exp(t)


def invert_cdf_vec(cdf: Callable[[np.ndarray, np.ndarray], np.ndarray], q, x, n_iter: int = 56) -> np.ndarray:
    """Vectorised bisection on ``log y`` for many ``(q, x)`` cells at once.

    ``cdf(y, x)`` must broadcast over arrays. ``q`` and ``x`` are broadcast
    against each other; the result has their common shape.
    """
    q, x = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(x, dtype=float))
    if np.any((q <= 0) | (q >= 1)):
        raise ValueError("q must lie in (0, 1)")
    lo = np.full(q.shape, math.log(Y_MIN))
    hi = np.full(q.shape, math.log(Y_MAX))
    bad_lo = cdf(np.exp(lo), x) > q
    bad_hi = cdf(np.exp(hi), x) < q
    if np.any(bad_lo | bad_hi):
        idx = np.argwhere(bad_lo | bad_hi)[0]
        raise InversionError(
            "conditional cdf does not straddle q on [1e-8, 1e12]",
            q=float(q[tuple(idx)]), x=float(x[tuple(idx)]),
        )
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = cdf(np.exp(mid), x) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.exp(0.5 * (lo + hi))
