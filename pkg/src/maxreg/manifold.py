"""Conditional quantiles and regression manifolds.

A *provider* is anything that can evaluate a conditional CDF: an
:mod:`maxreg.models` instance, a :class:`maxreg.bernstein.BernsteinAngularDensity`
or a plain callable ``cdf(y, x)``. Providers with a ``conditional_cdf_vec``
method are inverted on a whole grid at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import special
from ._roots import InversionError, invert_cdf, invert_cdf_vec
from .models import Logistic, independence_quantile

__all__ = [
    "RegressionManifold",
    "LinearAsymptote",
    "conditional_quantile",
    "logistic_quantile_closed_form",
    "logistic_linear_asymptote",
    "manifold_grid",
    "default_q_levels",
    "default_x_grid",
    "InversionError",
]


def default_q_levels() -> np.ndarray:
    return np.round(np.arange(1, 10) / 10.0, 10)


def default_x_grid(n: int = 100, upper: float = 20.0) -> np.ndarray:
    """``n`` log-spaced covariate values on ``[upper / 200, upper]``."""
    return np.geomspace(upper / 200.0, upper, n)


@dataclass
class RegressionManifold:
    """Conditional quantiles ``values[i, j] = y_{q_i | x_j}``.

    ``lower``/``upper`` hold pointwise credible bands at ``credible_level``
    when the manifold comes from a posterior sample. With several
    covariates ``x_grid`` has one row per covariate vector.
    """

    q_levels: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    credible_level: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.q_levels = np.asarray(self.q_levels, dtype=float)
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        shape = (self.q_levels.size, self.x_grid.shape[0])
        if self.values.shape != shape:
            raise ValueError(f"values has shape {self.values.shape}, expected {shape}")
        if self.lower is not None:
            self.lower = np.asarray(self.lower, dtype=float)
        if self.upper is not None:
            self.upper = np.asarray(self.upper, dtype=float)
        for band in (self.lower, self.upper):
            if band is not None and band.shape != shape:
                raise ValueError("band shape does not match values")
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            raise ValueError("manifold values must be finite and positive")

    def monotone_in_q(self, tol: float = 1e-9) -> bool:
        order = np.argsort(self.q_levels)
        return bool(np.all(np.diff(self.values[order], axis=0) >= -tol))

    def max_decrease_in_x(self) -> float:
        """Largest drop of a regression line between consecutive x-grid points."""
        order = np.argsort(self.x_grid)
        diffs = np.diff(self.values[:, order], axis=1)
        return float(max(0.0, -diffs.min())) if diffs.size else 0.0


@dataclass(frozen=True)
class LinearAsymptote:
    """Large-``x`` line ``y ~ gamma_q + beta_q * x`` of a Logistic regression line."""

    gamma_q: float
    beta_q: float
    q: float
    alpha: float

    def __call__(self, x):
        return self.gamma_q + self.beta_q * np.asarray(x, dtype=float)


def _as_cdf(provider) -> Callable[[float, float], float]:
    if hasattr(provider, "conditional_cdf"):
        return provider.conditional_cdf
    if callable(provider):
        return provider
    raise TypeError(f"{provider!r} does not provide a conditional CDF")


def conditional_quantile(cdf, q: float, x: float) -> float:
    """``inf{y > 0 : cdf(y | x) >= q}`` by bracket expansion and Brent's method.

    ``cdf`` is a callable ``cdf(y, x)`` or any provider with a
    ``conditional_cdf`` method.
    """
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    f = _as_cdf(cdf)
    try:
        return invert_cdf(lambda y: f(y, x), q, start=x)
    except InversionError as err:
        raise InversionError("conditional quantile inversion failed", **{**err.state, "q": q, "x": x}) from err


def logistic_quantile_closed_form(alpha: float, q: float, x: float) -> float:
    """Logistic conditional quantile through the Lambert W function.

    Falls back to numeric inversion when the closed form loses all
    precision (the inner bracket is not positive in floating point).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    k = alpha / (1.0 - alpha)
    # log of k/x * exp(k/x) * q^(alpha/(alpha-1))
    log_z = math.log(k / x) + k / x - k * math.log(q)
    w = special.lambert_w0(math.exp(log_z)) if log_z < 700 else special.lambert_w0_from_log(log_z)
    t = math.log(x * w / k) / alpha
    if not t > 0:
        return conditional_quantile(Logistic(alpha), q, x)
    return x * math.expm1(t) ** (-alpha)


def logistic_linear_asymptote(alpha: float, q: float) -> LinearAsymptote:
    """Slope and intercept of the Logistic regression line as ``x -> inf``.

    ``beta_q = (q^{-1/(1-alpha)} - 1)^{-alpha}`` and
    ``gamma_q = k P (P - 1)^{-alpha-1} (q^{-k} - 1)`` with
    ``k = alpha/(1-alpha)`` and ``P = q^{-1/(1-alpha)}``.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q}")
    k = alpha / (1.0 - alpha)
    log_p = -math.log(q) / (1.0 - alpha)
    pm1 = math.expm1(log_p)
    beta_q = pm1 ** (-alpha)
    gamma_q = k * math.exp(log_p) * pm1 ** (-alpha - 1.0) * math.expm1(-k * math.log(q))
    return LinearAsymptote(gamma_q=gamma_q, beta_q=beta_q, q=q, alpha=alpha)


def manifold_grid(provider, q_levels: Sequence[float] | None = None,
                  x_grid: Sequence[float] | None = None) -> RegressionManifold:
    """Evaluate ``y_{q|x}`` on every ``(q, x)`` cell.

    ``provider`` may also be the string ``"independence"``.
    """
    q_levels = default_q_levels() if q_levels is None else np.asarray(q_levels, dtype=float)
    x_grid = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    if provider == "independence":
        values = np.array([[independence_quantile(q)] * x_grid.size for q in q_levels])
    elif hasattr(provider, "conditional_cdf_vec"):
        values = invert_cdf_vec(provider.conditional_cdf_vec, q_levels[:, None], x_grid[None, :])
    else:
        values = np.empty((q_levels.size, x_grid.size))
        for i, q in enumerate(q_levels):
            for j, x in enumerate(x_grid):
                values[i, j] = conditional_quantile(provider, float(q), float(x))
    out = RegressionManifold(q_levels, x_grid, values)
    if not out.monotone_in_q():
        raise InversionError("manifold is not monotone in q")
    return out
