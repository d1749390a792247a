"""Scalar special functions used by the extreme-value formulas.

Everything here works on plain Python floats and is pure. Vectorised hot
paths elsewhere in the package use numpy/scipy equivalents; these scalar
versions are the reference implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "ScalarTolerance",
    "lambert_w0",
    "lambert_w0_from_log",
    "beta_cdf",
    "beta_sf",
    "beta_pdf",
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "log_gamma",
    "dirichlet_log_density",
]

_INV_E = math.exp(-1.0)
_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_FPMIN = 1e-300


@dataclass(frozen=True)
class ScalarTolerance:
    """Convergence controls for iterative scalar routines."""

    abs_tol: float = 1e-12
    max_iter: int = 100

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


_DEFAULT_TOL = ScalarTolerance()


def lambert_w0(z: float, tol: ScalarTolerance = _DEFAULT_TOL) -> float:
    """Principal branch of the Lambert W function for real ``z >= -1/e``.

    Halley iteration started from ``log(1 + z)`` when ``z >= 0`` and from
    the branch-point series otherwise.
    """
    z = float(z)
    if math.isnan(z) or z < -_INV_E:
        raise ValueError(f"lambert_w0 undefined for z={z!r} < -1/e")
    if z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf
    if z == -_INV_E:
        return -1.0
    if z >= 0.0:
        w = math.log1p(z)
        if z > 3.0:
            # closer start for large z; log(1+z) overshoots
            lz = math.log(z)
            w = lz - math.log(lz)
    else:
        p = math.sqrt(2.0 * (math.e * z + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    for _ in range(tol.max_iter):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 4.0 * 2.2e-16 * (1.0 + abs(w)):
            break
    return w


def lambert_w0_from_log(log_z: float, tol: ScalarTolerance = _DEFAULT_TOL) -> float:
    """``W(exp(log_z))`` for arguments too large to exponentiate.

    Solves ``w + log(w) = log_z``; only the positive half-line is handled.
    """
    if log_z < 1.0:
        return lambert_w0(math.exp(log_z), tol)
    w = log_z - math.log(log_z)
    for _ in range(tol.max_iter):
        f = w + math.log(w) - log_z
        d1 = 1.0 + 1.0 / w
        d2 = -1.0 / (w * w)
        step = f / (d1 - 0.5 * f * d2 / d1)
        w -= step
        if abs(step) <= 4.0 * 2.2e-16 * w:
            break
    return w


def _check_beta_args(q, a, b):
    if not (a > 0 and b > 0):
        raise ValueError(f"beta parameters must be positive, got a={a}, b={b}")
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"beta argument must lie in [0, 1], got {q}")


def _betacf(a: float, b: float, x: float, tol: ScalarTolerance) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, tol.max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol.abs_tol:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )


_BETA_TOL = ScalarTolerance(abs_tol=1e-16, max_iter=5000)


def _beta_tails(q: float, a: float, b: float, tol: ScalarTolerance) -> tuple[float, float]:
    """Return ``(I_q(a, b), 1 - I_q(a, b))`` each computed without cancellation."""
    if q == 0.0:
        return 0.0, 1.0
    if q == 1.0:
        return 1.0, 0.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(q) + b * math.log1p(-q)
    )
    front = math.exp(log_front)
    if q < (a + 1.0) / (a + b + 2.0):
        lower = front * _betacf(a, b, q, tol) / a
        return lower, 1.0 - lower
    upper = front * _betacf(b, a, 1.0 - q, tol) / b
    return 1.0 - upper, upper


def beta_cdf(q: float, a: float, b: float, tol: ScalarTolerance = _BETA_TOL) -> float:
    """Regularized incomplete beta function ``I_q(a, b)``."""
    _check_beta_args(q, a, b)
    return _beta_tails(q, a, b, tol)[0]


def beta_sf(q: float, a: float, b: float, tol: ScalarTolerance = _BETA_TOL) -> float:
    """Upper tail ``1 - I_q(a, b)``, accurate when the lower tail is close to one."""
    _check_beta_args(q, a, b)
    return _beta_tails(q, a, b, tol)[1]


def beta_pdf(q: float, a: float, b: float) -> float:
    """Beta(a, b) density, with the analytic limits at the endpoints."""
    _check_beta_args(q, a, b)
    log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    if q == 0.0:
        if a < 1:
            return math.inf
        return math.exp(log_norm) if a == 1 else 0.0
    if q == 1.0:
        if b < 1:
            return math.inf
        return math.exp(log_norm) if b == 1 else 0.0
    return math.exp(log_norm + (a - 1.0) * math.log(q) + (b - 1.0) * math.log1p(-q))


def normal_cdf(x: float) -> float:
    """Standard Normal distribution function."""
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_pdf(x: float) -> float:
    """Standard Normal density."""
    return math.exp(-0.5 * x * x - _LOG_SQRT_2PI)


# Acklam's rational approximation coefficients
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        r = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / (
            (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        )
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    s = p - 0.5
    r = s * s
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )


def normal_quantile(p: float) -> float:
    """Inverse of the standard Normal distribution function on ``(0, 1)``."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"normal_quantile requires 0 < p < 1, got {p}")
    if p > 0.5:
        return -normal_quantile(1.0 - p)
    x = _acklam(p)
    # one Newton step against the erfc-based cdf
    x -= (normal_cdf(x) - p) / normal_pdf(x)
    return x


def log_gamma(x: float) -> float:
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def dirichlet_log_density(w: Sequence[float], alpha: Sequence[float]) -> float:
    """Log density of ``Dirichlet(alpha)`` at an interior simplex point ``w``.

    Raises
    ------
    ValueError
        If ``w`` has a zero (or negative) component, does not sum to one, or
        ``alpha`` is not componentwise positive.
    """
    w = [float(v) for v in w]
    alpha = [float(a) for a in alpha]
    if len(w) != len(alpha):
        raise ValueError("w and alpha must have the same length")
    if any(a <= 0 for a in alpha):
        raise ValueError("alpha must be componentwise positive")
    if any(v <= 0 for v in w):
        raise ValueError("w must be strictly inside the simplex")
    if abs(math.fsum(w) - 1.0) > 1e-10:
        raise ValueError("w must sum to one")
    out = math.lgamma(math.fsum(alpha)) - math.fsum(math.lgamma(a) for a in alpha)
    return out + math.fsum((a - 1.0) * math.log(v) for a, v in zip(alpha, w))
