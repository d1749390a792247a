"""Quantile residuals and QQ data against the standard Normal.

For each pair above the radial threshold the residual is
``Phi^{-1}(G(y | x))``. The conditional CDF is continuous, so no
randomisation is needed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import stats

from . import special
from .bernstein import BernsteinAngularDensity
from .mcmc import McmcChain, thin_indices

__all__ = ["ResidualReport", "quantile_residuals", "residuals_csv", "CLAMP"]

log = logging.getLogger(__name__)

CLAMP = 1e-10


@dataclass
class ResidualReport:
    """Residuals sorted by observation index, with matching QQ abscissae."""

    indices: np.ndarray
    x: np.ndarray
    y: np.ndarray
    ghat: np.ndarray
    residuals: np.ndarray
    theoretical_quantiles: np.ndarray
    n_clamped: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.residuals.size
        if any(a.shape[0] != n for a in (self.indices, self.ghat, self.theoretical_quantiles)):
            raise ValueError("report arrays differ in length")
        if not np.all(np.isfinite(self.residuals)):
            raise ValueError("residuals must be finite")

    @property
    def n(self) -> int:
        return int(self.residuals.size)

    def ks_statistic(self) -> float:
        """Kolmogorov–Smirnov distance of the residuals from N(0, 1); ``nan`` if empty."""
        if self.n == 0:
            return float("nan")
        return float(stats.kstest(self.residuals, "norm").statistic)

    def ks_pvalue(self) -> float:
        if self.n == 0:
            return float("nan")
        return float(stats.kstest(self.residuals, "norm").pvalue)


def _fitted_cdf(fit, y, x, thin: int) -> np.ndarray:
    if isinstance(fit, McmcChain):
        # posterior mean of G(y | x) over thinned states
        idx = thin_indices(fit.n_states, thin)
        return np.mean([fit.density(int(i)).conditional_cdf_vec(y, x) for i in idx], axis=0)
    return np.asarray(fit.conditional_cdf_vec(y, x), dtype=float)


def quantile_residuals(fit: Union[BernsteinAngularDensity, McmcChain], pairs, threshold_u: float,
                       thin: int = 200) -> ResidualReport:
    """Residuals for the rows of ``pairs`` whose coordinate sum exceeds ``threshold_u``.

    ``pairs`` has columns ``(x_1, ..., x_p, y)``. CDF values of exactly 0
    or 1 are clamped to ``[1e-10, 1 - 1e-10]`` and counted.
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] < 2:
        raise ValueError("pairs must have shape (n, d) with d >= 2")
    idx = np.flatnonzero(pairs.sum(axis=1) > threshold_u)
    x = pairs[idx, 0] if pairs.shape[1] == 2 else pairs[idx, :-1]
    y = pairs[idx, -1]
    n = idx.size
    if n == 0:
        empty = np.zeros(0)
        return ResidualReport(idx, x, y, empty, empty, empty)
    g = _fitted_cdf(fit, y, x, thin)
    n_clamped = int(np.sum((g < CLAMP) | (g > 1.0 - CLAMP)))
    if n_clamped:
        log.warning("clamped %d conditional CDF values to [%g, 1 - %g]", n_clamped, CLAMP, CLAMP)
    gc = np.clip(g, CLAMP, 1.0 - CLAMP)
    res = np.array([special.normal_quantile(float(v)) for v in gc])
    ranks = np.argsort(np.argsort(res, kind="stable"), kind="stable")
    theo = np.array([special.normal_quantile((r + 0.5) / n) for r in ranks])
    return ResidualReport(idx, x, y, g, res, theo, n_clamped, meta={"threshold_u": float(threshold_u)})


def residuals_csv(report: ResidualReport) -> str:
    from .io import fmt

    lines = ["index,x,y,ghat,residual,theoretical"]
    for i in range(report.n):
        xi = report.x[i]
        xs = fmt(xi) if np.ndim(xi) == 0 else ";".join(map(fmt, xi))
        lines.append(",".join([str(int(report.indices[i])), xs, fmt(report.y[i]), fmt(report.ghat[i]),
                               fmt(report.residuals[i]), fmt(report.theoretical_quantiles[i])]))
    return "\n".join(lines) + "\n"
