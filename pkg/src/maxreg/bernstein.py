"""Bernstein-polynomial angular densities on the unit simplex.

An angular density of order ``J`` on the ``d``-simplex is a mixture of
Dirichlet densities indexed by compositions ``alpha`` of ``J`` into ``d``
positive parts. The weights sum to one and every coordinate has mean
``1/d``. Those ``d`` linear constraints pin the ``d`` corner weights (the
compositions with a single part equal to ``J - d + 1``). The remaining
``m - d`` weights come from a generalised logit of free parameters.

Coordinate convention: simplex points and data rows are ordered as
``(x_1, ..., x_p, y)``. The covariates come first and the response is
the last coordinate, so for ``d = 2`` the angle ``w`` is the share of
the covariate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special as sps

from ._roots import invert_cdf_vec

__all__ = [
    "InvalidWeights",
    "InsufficientExceedances",
    "QuadratureError",
    "QuadratureConfig",
    "BernsteinAngularDensity",
    "PseudoAngleSample",
    "enumerate_compositions",
    "corner_compositions",
    "ConstraintMap",
    "constraint_map",
    "weights_from_logits",
    "uniform_density",
    "density",
    "conditional_cdf_p1",
    "conditional_cdf_approx",
    "decompose",
    "sample_pairs",
]

WEIGHT_SUM_TOL = 1e-12
MEAN_TOL = 1e-10
CORNER_TOL = 1e-14


class InvalidWeights(ValueError):
    """The free logits imply a negative corner weight."""


class InsufficientExceedances(ValueError):
    """Too few pseudo-angles above the radial threshold to fit a density."""


class QuadratureError(ArithmeticError):
    """Gauss–Legendre quadrature did not settle within the order limit."""


@lru_cache(maxsize=None)
def _compositions(J: int, d: int) -> tuple[tuple[int, ...], ...]:
    if d == 1:
        return ((J,),)
    out = []
    for first in range(1, J - d + 2):
        for rest in _compositions(J - first, d - 1):
            out.append((first,) + rest)
    return tuple(out)


def enumerate_compositions(J: int, d: int) -> list[tuple[int, ...]]:
    """All ``alpha`` in N^d with ``|alpha| = J``, lexicographically ordered."""
    if d < 1 or J < d:
        raise ValueError(f"need J >= d >= 1, got J={J}, d={d}")
    return list(_compositions(J, d))


def corner_compositions(J: int, d: int) -> list[tuple[int, ...]]:
    """The ``d`` corner compositions; corner ``j`` has ``J - d + 1`` in slot ``j``."""
    return [tuple(J - d + 1 if i == j else 1 for i in range(d)) for j in range(d)]


@dataclass(frozen=True)
class ConstraintMap:
    """Affine map from free weights to corner weights.

    ``corner = offset + matrix @ free`` solves the normalisation and mean
    constraints for the corners, given the free weights.
    """

    J: int
    d: int
    compositions: np.ndarray  # (m, d) int
    free_index: np.ndarray  # positions of free compositions
    corner_index: np.ndarray  # positions of corners, in corner order
    offset: np.ndarray  # (d,)
    matrix: np.ndarray  # (d, n_free)

    @property
    def m(self) -> int:
        return self.compositions.shape[0]

    @property
    def n_free(self) -> int:
        return self.free_index.size


@lru_cache(maxsize=64)
def constraint_map(J: int, d: int) -> ConstraintMap:
    comps = np.array(enumerate_compositions(J, d), dtype=int)
    m = comps.shape[0]
    if J == d:
        # a single composition (1, ..., 1): weight forced to one
        return ConstraintMap(J, d, comps, np.array([], dtype=int), np.array([0]),
                             np.array([1.0]), np.zeros((1, 0)))
    lookup = {tuple(c): i for i, c in enumerate(comps)}
    corner_index = np.array([lookup[c] for c in corner_compositions(J, d)])
    free_index = np.array([i for i in range(m) if i not in set(corner_index)], dtype=int)
    # rows: normalisation, then mean constraints for coordinates 0..d-2
    rows = np.vstack([np.ones(m), comps[:, : d - 1].T.astype(float)])
    rhs = np.concatenate([[1.0], np.full(d - 1, J / d)])
    a_corner = rows[:, corner_index]
    a_free = rows[:, free_index]
    offset = np.linalg.solve(a_corner, rhs)
    matrix = -np.linalg.solve(a_corner, a_free)
    return ConstraintMap(J, d, comps, free_index, corner_index, offset, matrix)


@dataclass(frozen=True)
class QuadratureConfig:
    order: int = 64
    rel_tol: float = 1e-8
    max_order: int = 4096


@dataclass
class BernsteinAngularDensity:
    """Mixture ``h(w) = sum_alpha pi_alpha dir(w; alpha)`` on the ``d``-simplex."""

    J: int
    d: int
    weights: np.ndarray
    free_logits: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.d < 2 or self.J < self.d:
            raise ValueError(f"need J >= d >= 2, got J={self.J}, d={self.d}")
        if self.weights.shape != (self.constraints.m,):
            raise ValueError(
                f"expected {self.constraints.m} weights for J={self.J}, d={self.d}, got {self.weights.shape}"
            )
        if self.free_logits is not None:
            self.free_logits = np.asarray(self.free_logits, dtype=float)
        if not self.is_valid():
            raise InvalidWeights("weights are negative or violate the normalisation or mean constraints")

    @property
    def constraints(self) -> ConstraintMap:
        return constraint_map(self.J, self.d)

    @property
    def compositions(self) -> np.ndarray:
        return self.constraints.compositions

    @property
    def corner_indices(self) -> np.ndarray:
        return self.constraints.corner_index

    def constraint_residuals(self) -> tuple[float, np.ndarray]:
        """``(sum(pi) - 1, per-coordinate mean constraint residuals)``."""
        total = math.fsum(self.weights) - 1.0
        means = self.compositions.T.astype(float) @ self.weights - self.J / self.d
        return total, means

    def is_valid(self, sum_tol: float = WEIGHT_SUM_TOL, mean_tol: float = MEAN_TOL) -> bool:
        total, means = self.constraint_residuals()
        return bool(
            np.all(self.weights >= 0) and abs(total) <= sum_tol and np.all(np.abs(means) <= mean_tol)
        )

    def log_basis(self, w) -> np.ndarray:
        """``log dir(w_i; alpha)`` for each row of ``w`` and each composition."""
        w = _as_simplex_points(w, self.d)
        comps = self.compositions
        log_norm = sps.gammaln(self.J) - sps.gammaln(comps).sum(axis=1)
        with np.errstate(divide="ignore"):
            logs = sps.xlogy(comps[None, :, :] - 1.0, w[:, None, :]).sum(axis=2)
        return logs + log_norm[None, :]

    def density(self, w) -> np.ndarray:
        return density(self, w)

    def conditional_cdf(self, y: float, x) -> float:
        return float(self.conditional_cdf_vec(y, x))

    def conditional_cdf_vec(self, y, x):
        if self.d == 2:
            return _cdf_p1(self, y, x)
        return conditional_cdf_approx(self, y, x)

    def to_dict(self) -> dict:
        out = {
            "J": int(self.J),
            "d": int(self.d),
            "compositions": [list(map(int, c)) for c in self.compositions],
            "weights": [float(v) for v in self.weights],
        }
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BernsteinAngularDensity":
        J, d = int(data["J"]), int(data["d"])
        comps = [tuple(c) for c in data["compositions"]]
        if comps != enumerate_compositions(J, d):
            raise ValueError("composition list is not the canonical lexicographic order")
        return cls(J, d, np.asarray(data["weights"], dtype=float), meta=dict(data.get("meta", {})))


def _as_simplex_points(w, d: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if d == 2 and w.ndim <= 1:
        # bivariate shorthand: values are the first (covariate) coordinate
        w = np.atleast_1d(w)
        w = np.column_stack([w, 1.0 - w])
    w = np.atleast_2d(w)
    if w.shape[-1] != d:
        raise ValueError(f"simplex points must have {d} coordinates")
    if np.any(w < -1e-12) or np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("points must lie on the simplex")
    return np.clip(w, 0.0, 1.0)


def weights_from_logits(free_logits, J: int, d: int) -> BernsteinAngularDensity:
    """Build the density whose free weights are ``exp(l) / (d + sum exp(l))``.

    Raises
    ------
    InvalidWeights
        When the constraint solve produces a negative corner weight.
    """
    cmap = constraint_map(J, d)
    free_logits = np.asarray(free_logits, dtype=float).ravel()
    if free_logits.size != cmap.n_free:
        raise ValueError(f"expected {cmap.n_free} free logits for J={J}, d={d}, got {free_logits.size}")
    weights = np.empty(cmap.m)
    if cmap.n_free:
        top = max(0.0, float(free_logits.max()))
        e = np.exp(free_logits - top)
        free = e / (d * math.exp(-top) + e.sum())
    else:
        free = np.zeros(0)
    corners = cmap.offset + cmap.matrix @ free
    # differently ordered sums near the boundary can land a few ulps below zero
    corners[(corners < 0) & (corners >= -CORNER_TOL)] = 0.0
    if np.any(corners < 0):
        raise InvalidWeights(f"negative corner weight(s) {corners[corners < 0]}")
    weights[cmap.free_index] = free
    weights[cmap.corner_index] = corners
    return BernsteinAngularDensity(J, d, weights, free_logits=free_logits)


def uniform_density(J: int, d: int = 2) -> BernsteinAngularDensity:
    """Equal weights on every composition (all free logits zero)."""
    return weights_from_logits(np.zeros(constraint_map(J, d).n_free), J, d)


def density(h: BernsteinAngularDensity, w) -> np.ndarray:
    """``h(w)`` at one or many simplex points.

    On the boundary the analytic limit is used: a basis term whose exponent
    ``alpha_i - 1`` is zero on the vanishing coordinate keeps its finite
    value, every other term contributes zero.
    """
    scalar = np.ndim(w) == 0 or (np.ndim(w) == 1 and h.d != 2)
    out = np.exp(h.log_basis(w)) @ h.weights
    return float(out[0]) if scalar else out


def _log_binom_row(J: int) -> np.ndarray:
    k = np.arange(J + 1)
    return sps.gammaln(J + 1) - sps.gammaln(k + 1) - sps.gammaln(J - k + 1)


def _cdf_p1(h: BernsteinAngularDensity, y, x):
    y, x = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(x, dtype=float))
    shape = y.shape
    yf, xf = y.ravel(), x.ravel()
    if np.any(yf <= 0) or np.any(xf <= 0):
        raise ValueError("x and y must be positive")
    J = h.J
    a1 = h.compositions[:, 0]
    a2 = J - a1
    finite = np.isfinite(yf)
    ys = np.where(finite, yf, 1.0)
    log_s = np.log(xf + ys)
    log_w = np.log(xf) - log_s
    log_1mw = np.log(ys) - log_s
    k = np.arange(J + 1)
    log_pmf = _log_binom_row(J)[None, :] + k[None, :] * log_w[:, None] + (J - k)[None, :] * log_1mw[:, None]
    pmf = np.exp(log_pmf)
    head = np.cumsum(pmf, axis=1)  # P(Bin <= k)
    tail = np.cumsum(pmf[:, ::-1], axis=1)[:, ::-1]  # P(Bin >= k)
    # J * int_omega^1 w h(w) dw and J * int_0^omega (1 - w) h(w) dw
    s1 = np.minimum(head[:, a1], 1.0) @ (h.weights * a1)
    s2 = np.minimum(tail[:, a1], 1.0) @ (h.weights * a2)
    s1 = np.where(finite, s1, J / 2.0)
    s2 = np.where(finite, s2, 0.0)
    with np.errstate(divide="ignore"):
        log_g = np.log(2.0 * s1 / J) - (2.0 / J) * (s1 / xf + s2 / ys) + 1.0 / xf
    out = np.clip(np.exp(log_g), 0.0, 1.0)
    return out.reshape(shape) if shape else float(out[0])


def conditional_cdf_p1(h: BernsteinAngularDensity, y, x):
    """Exact ``P(Y <= y | X = x)`` for a bivariate Bernstein angular density.

    Uses ``I_w(a, b) = P(Binomial(a + b - 1, w) >= a)`` for integer shapes,
    so every composition's incomplete-beta terms come from one binomial pmf
    per ``(x, y)`` cell.
    """
    if h.d != 2:
        raise ValueError("conditional_cdf_p1 requires d = 2")
    return _cdf_p1(h, y, x)


@lru_cache(maxsize=32)
def _gauss_legendre(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _log_kernel_integrals(a: np.ndarray, J: int, upper: np.ndarray, order: int) -> np.ndarray:
    """``log int_0^upper v^(a-1) (1-v)^(J-a) dv`` for each upper limit and exponent."""
    nodes, weights = _gauss_legendre(order)
    v = upper[:, None] * nodes[None, :]  # (N, order)
    log_v = np.log(v)
    log_1mv = np.log1p(-v)
    terms = (
        (a[None, :, None] - 1.0) * log_v[:, None, :]
        + (J - a)[None, :, None] * log_1mv[:, None, :]
        + np.log(weights)[None, None, :]
    )
    return sps.logsumexp(terms, axis=2) + np.log(upper)[:, None]


def conditional_cdf_approx(h: BernsteinAngularDensity, y, x, quadrature: QuadratureConfig = QuadratureConfig(),
                           threshold: Optional[float] = None):
    """Point-process approximation of ``P(Y <= y | X = x)`` for ``p = d - 1`` covariates.

    ``x`` has trailing dimension ``p``. The response integral is mapped to
    ``(0, 1)`` by ``t = S v / (1 - v)`` with ``S = sum(x)``, under which each
    basis integrand becomes ``v^(a-1) (1-v)^(J-a)``. Gauss–Legendre order
    is doubled until the result changes by less than ``quadrature.rel_tol``.
    """
    p = h.d - 1
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != p:
        raise ValueError(f"x must have trailing dimension {p}")
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(y.shape, x.shape[:-1])
    y = np.broadcast_to(y, shape).ravel()
    x = np.broadcast_to(x, shape + (p,)).reshape(-1, p)
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValueError("x and y must be positive")
    if threshold is not None and np.any(y + x.sum(axis=1) <= threshold):
        warnings.warn("evaluating below the fitted radial threshold; approximation may be poor", stacklevel=2)
    comps = h.compositions
    J = h.J
    a_resp = comps[:, -1].astype(float)
    s = x.sum(axis=1)
    with np.errstate(divide="ignore"):
        log_pi = np.log(h.weights)
    log_b = sps.gammaln(comps).sum(axis=1) - sps.gammaln(J)
    coef = (
        log_pi[None, :] - log_b[None, :]
        + (np.log(x)[:, None, :] * (comps[None, :, :p] - 1.0)).sum(axis=2)
        + (a_resp - J - 1.0)[None, :] * np.log(s)[:, None]
    )
    finite = np.isfinite(y)
    with np.errstate(invalid="ignore"):
        v_up = np.where(finite, y / (y + s), 1.0)
    v_up = np.where(v_up >= 1.0, np.nextafter(1.0, 0.0), v_up)
    order = quadrature.order
    prev = None
    change = math.nan
    while True:
        num = _log_kernel_integrals(a_resp, J, v_up, order)
        den = _log_kernel_integrals(a_resp, J, np.ones(1), order)
        val = np.exp(sps.logsumexp(coef + num, axis=1) - sps.logsumexp(coef + den, axis=1))
        if prev is not None:
            change = np.max(np.abs(val - prev) / np.maximum(np.abs(val), 1e-300))
            if change < quadrature.rel_tol:
                break
        if order * 2 > quadrature.max_order:
            raise QuadratureError(f"no convergence up to order {order} (last relative change {change:.3g})")
        prev = val
        order *= 2
    val = np.where(finite, np.clip(val, 0.0, 1.0), 1.0)
    return val.reshape(shape) if shape else float(val[0])


@dataclass
class PseudoAngleSample:
    """Pseudo-angles and radii of the observations above a radial threshold."""

    angles: np.ndarray
    radii: np.ndarray
    threshold_u: float
    radial_quantile: float
    d: int

    @property
    def k(self) -> int:
        return int(self.angles.shape[0])

    @classmethod
    def empty(cls, d: int = 2) -> "PseudoAngleSample":
        return cls(np.zeros((0, d)), np.zeros(0), math.inf, 1.0, d)


def decompose(data, radial_quantile: float = 0.95) -> PseudoAngleSample:
    """Pseudo-polar decomposition ``R = sum(row)``, ``W = row / R``; keep ``R > u``.

    ``u`` is the empirical ``radial_quantile`` of the radii.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("data must be an (n, d) array with d >= 2")
    if np.any(data <= 0) or not np.all(np.isfinite(data)):
        raise ValueError("data must be positive and finite (Fréchet scale)")
    if not (0.0 < radial_quantile < 1.0):
        raise ValueError("radial_quantile must lie in (0, 1)")
    d = data.shape[1]
    radii = data.sum(axis=1)
    u = float(np.quantile(radii, radial_quantile))
    keep = radii > u
    k = int(keep.sum())
    if k < d + 1:
        raise InsufficientExceedances(f"only {k} exceedances above u={u:.6g}; need at least {d + 1}")
    angles = data[keep] / radii[keep, None]
    return PseudoAngleSample(angles, radii[keep], u, radial_quantile, d)


def sample_pairs(h: BernsteinAngularDensity, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` pairs ``(x, y)`` from the bivariate law with angular density ``h``."""
    if h.d != 2:
        raise ValueError("sample_pairs requires d = 2")
    rng = np.random.default_rng(seed)
    u = np.clip(rng.random((n, 2)), 1e-15, 1.0 - 1e-15)
    x = -1.0 / np.log(u[:, 0])
    y = invert_cdf_vec(h.conditional_cdf_vec, u[:, 1], x)
    return np.column_stack([x, y])
