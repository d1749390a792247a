"""Parametric bivariate extreme-value models on unit Fréchet margins.

Three families are available: :class:`Logistic`, :class:`HuslerReiss` and
:class:`ColesTawn`. Each exposes the joint distribution function
``G(x, y)`` and the conditional distribution function of the response
``Y`` given the covariate ``X = x``. Every conditional CDF is written in
the simplified form

    G(y | x) = exp(1/x) * G(x, y) * (-x**2 * dV/dx)

where the cross terms produced by differentiating the exponent measure
cancel analytically. Evaluation is carried out in log space.

Scalar methods use :mod:`maxreg.special`; the ``*_vec`` methods are numpy
twins used for sampling and grid evaluation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special as sps

from . import special
from ._roots import InversionError, invert_cdf_vec

__all__ = [
    "Logistic",
    "HuslerReiss",
    "ColesTawn",
    "EvModel",
    "SCENARIOS",
    "joint_cdf",
    "conditional_cdf",
    "sample",
    "independence_quantile",
    "perfect_dependence_quantile",
    "softmax_conditional_cdf",
    "parse_model",
    "InversionError",
]


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class Logistic:
    """Symmetric logistic model; ``alpha = 1`` is exact independence."""

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"Logistic alpha must lie in (0, 1], got {self.alpha}")

    def joint_cdf(self, x, y):
        _check_positive(x=x, y=y)
        a = self.alpha
        log_a = np.logaddexp(-math.log(x) / a, -math.log(y) / a)
        return math.exp(-math.exp(a * log_a))

    def conditional_cdf(self, y, x):
        _check_positive(y=y, x=x)
        a = self.alpha
        if a == 1.0:
            return math.exp(-1.0 / y)
        if math.isinf(y):
            return 1.0
        lx = math.log(x)
        log_a = float(np.logaddexp(-lx / a, -math.log(y) / a))
        out = -math.exp(a * log_a) + 1.0 / x + (a - 1.0) * log_a + (1.0 - 1.0 / a) * lx
        return min(math.exp(out), 1.0)

    def conditional_cdf_vec(self, y, x):
        y, x = np.asarray(y, dtype=float), np.asarray(x, dtype=float)
        a = self.alpha
        if a == 1.0:
            return np.exp(-1.0 / y) + 0.0 * x
        lx = np.log(x)
        log_a = np.logaddexp(-lx / a, -np.log(y) / a)
        out = -np.exp(a * log_a) + 1.0 / x + (a - 1.0) * log_a + (1.0 - 1.0 / a) * lx
        return np.minimum(np.exp(out), 1.0)


@dataclass(frozen=True)
class HuslerReiss:
    """Hüsler–Reiss model; small ``lam`` is strong dependence."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"HuslerReiss lambda must be positive, got {self.lam}")

    def _args(self, x, y):
        r = (math.log(y) - math.log(x)) / (2.0 * self.lam)
        return self.lam + r, self.lam - r

    def joint_cdf(self, x, y):
        _check_positive(x=x, y=y)
        if math.isinf(y):
            return math.exp(-1.0 / x)
        if math.isinf(x):
            return math.exp(-1.0 / y)
        a, b = self._args(x, y)
        return math.exp(-special.normal_cdf(a) / x - special.normal_cdf(b) / y)

    def conditional_cdf(self, y, x):
        _check_positive(y=y, x=x)
        if math.isinf(y):
            return 1.0
        a, b = self._args(x, y)
        pa = special.normal_cdf(a)
        if pa == 0.0:
            return 0.0
        out = math.log(pa) + special.normal_cdf(-a) / x - special.normal_cdf(b) / y
        return min(math.exp(out), 1.0)

    def conditional_cdf_vec(self, y, x):
        y, x = np.asarray(y, dtype=float), np.asarray(x, dtype=float)
        r = (np.log(y) - np.log(x)) / (2.0 * self.lam)
        a, b = self.lam + r, self.lam - r
        out = sps.log_ndtr(a) + sps.ndtr(-a) / x - sps.ndtr(b) / y
        return np.minimum(np.exp(out), 1.0)


@dataclass(frozen=True)
class ColesTawn:
    """Coles–Tawn (Dirichlet) model with shape parameters ``alpha``, ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(
                f"ColesTawn parameters must be positive, got alpha={self.alpha}, beta={self.beta}"
            )

    def _q(self, x, y):
        # alpha/y / (alpha/y + beta/x), rearranged so y -> inf gives 0 cleanly
        return self.alpha * x / (self.alpha * x + self.beta * y)

    def joint_cdf(self, x, y):
        _check_positive(x=x, y=y)
        if math.isinf(y):
            return math.exp(-1.0 / x)
        if math.isinf(x):
            return math.exp(-1.0 / y)
        a, b = self.alpha, self.beta
        q = self._q(x, y)
        v = special.beta_sf(q, a + 1.0, b) / x + special.beta_cdf(q, a, b + 1.0) / y
        return math.exp(-v)

    def conditional_cdf(self, y, x):
        _check_positive(y=y, x=x)
        if math.isinf(y):
            return 1.0
        a, b = self.alpha, self.beta
        q = self._q(x, y)
        upper = special.beta_sf(q, a + 1.0, b)
        if upper == 0.0:
            return 0.0
        out = math.log(upper) + special.beta_cdf(q, a + 1.0, b) / x - special.beta_cdf(q, a, b + 1.0) / y
        return min(math.exp(out), 1.0)

    def conditional_cdf_vec(self, y, x):
        y, x = np.asarray(y, dtype=float), np.asarray(x, dtype=float)
        a, b = self.alpha, self.beta
        q = a * x / (a * x + b * y)
        with np.errstate(divide="ignore"):
            out = (
                np.log(sps.betaincc(a + 1.0, b, q))
                + sps.betainc(a + 1.0, b, q) / x
                - sps.betainc(a, b + 1.0, q) / y
            )
        return np.minimum(np.exp(out), 1.0)


EvModel = Union[Logistic, HuslerReiss, ColesTawn]

SCENARIOS: dict[int, EvModel] = {
    1: HuslerReiss(0.1),
    2: Logistic(0.9),
    3: ColesTawn(0.5, 100.0),
}


def joint_cdf(model: EvModel, x: float, y: float) -> float:
    """``G(x, y)`` of ``model``; either argument may be ``inf``."""
    return model.joint_cdf(x, y)


def conditional_cdf(model: EvModel, y: float, given_x: float) -> float:
    """``P(Y <= y | X = given_x)`` under ``model``."""
    return model.conditional_cdf(y, given_x)


def sample(model: EvModel, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. pairs from ``model``.

    ``X`` is exact unit Fréchet, ``X = -1/log(U)``; ``Y`` is obtained by
    inverting the conditional CDF at the drawn ``X``.

    Returns
    -------
    numpy.ndarray
        Array of shape ``(n, 2)`` with columns ``x, y``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    u = rng.random((n, 2))
    u = np.clip(u, 1e-15, 1.0 - 1e-15)
    x = -1.0 / np.log(u[:, 0])
    y = invert_cdf_vec(model.conditional_cdf_vec, u[:, 1], x)
    return np.column_stack([x, y])


def independence_quantile(q: float) -> float:
    """Conditional quantile under complete independence, ``-1/log(q)``."""
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q}")
    return -1.0 / math.log(q)


def perfect_dependence_quantile(x) -> float:
    """Conditional quantile under perfect dependence: the smallest covariate."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 0 or np.any(x <= 0):
        raise ValueError("x must be a non-empty positive vector")
    return float(x.min())


def softmax_conditional_cdf(y: float, x, N: float) -> float:
    """Soft-maximum approximation to the perfect-dependence conditional CDF.

    Evaluates ``((e^{N/y} + S) / S)^(-1/N - p)`` with ``S = sum_i e^{N/x_i}``
    through log-sum-exp, so large ``N`` does not overflow.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_positive(y=y, N=N)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    p = x.size
    log_s = sps.logsumexp(N / x)
    log_num = np.logaddexp(N / y, log_s)
    return float(np.exp((-1.0 / N - p) * (log_num - log_s)))


_MODEL_RE = re.compile(r"^\s*(\w+)\s*[:(]\s*([^)]*)\)?\s*$")


def parse_model(text: str) -> EvModel:
    """Parse ``logistic:0.5``, ``hr:0.1``, ``ct:0.5,100`` (or ``name(args)``)."""
    m = _MODEL_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse model spec {text!r}")
    name = m.group(1).lower()
    args = [float(v) for v in m.group(2).split(",") if v.strip()]
    if name in ("logistic", "log") and len(args) == 1:
        return Logistic(*args)
    if name in ("hr", "huslerreiss", "husler_reiss") and len(args) == 1:
        return HuslerReiss(*args)
    if name in ("ct", "colestawn", "coles_tawn") and len(args) == 2:
        return ColesTawn(*args)
    raise ValueError(f"unknown model or wrong parameter count in {text!r}")
