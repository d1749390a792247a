"""Bayesian fitting of Bernstein angular densities.

The target is the posterior of the free logits given pseudo-angles, with
likelihood ``prod_i h(w_i)``, a ``Dirichlet(c * 1_m)`` prior on the full
weight vector (corners included), and the Jacobian of the logit-to-weight
map. Sampling is single-component adaptive random-walk Metropolis: one
Gaussian step per coordinate per sweep, with per-coordinate log step sizes
tuned towards ``target_accept`` during burn-in only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special as sps

from . import special
from ._roots import InversionError, invert_cdf_vec
from .bernstein import (
    BernsteinAngularDensity,
    InsufficientExceedances,
    InvalidWeights,
    PseudoAngleSample,
    constraint_map,
    weights_from_logits,
)
from .manifold import RegressionManifold, default_q_levels, default_x_grid

__all__ = [
    "McmcConfig",
    "McmcChain",
    "log_posterior",
    "log_posterior_grad",
    "run_chain",
    "effective_sample_size",
    "posterior_manifold",
    "thin_indices",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 10000
    burn_in: int = 4000
    prior_concentration: float = 0.1
    J: Optional[int] = None  # None means J = k
    seed: int = 0
    target_accept: float = 0.44
    adapt_window: int = 50
    initial_step: float = 1.0
    allow_prior_only: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if not self.prior_concentration > 0:
            raise ValueError("prior_concentration must be positive")
        if self.J is not None and self.J < 2:
            raise ValueError("J must be at least 2")
        if not (0.0 < self.target_accept < 1.0):
            raise ValueError("target_accept must lie in (0, 1)")
        if self.adapt_window < 1:
            raise ValueError("adapt_window must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")

    def resolve_J(self, sample: PseudoAngleSample) -> int:
        if self.J is not None:
            return self.J
        return max(sample.k, sample.d + 1)


@dataclass
class McmcChain:
    """Post burn-in states of one chain plus its diagnostics."""

    J: int
    d: int
    states: np.ndarray
    log_posterior_trace: np.ndarray
    acceptance_rate_per_coordinate: np.ndarray
    seed: int
    step_sizes: np.ndarray
    step_history: np.ndarray  # log step sizes at each adaptation window boundary
    burn_in: int = 0
    warnings: list = field(default_factory=list)
    threshold_u: Optional[float] = None

    @property
    def n_states(self) -> int:
        return int(self.states.shape[0])

    def density(self, i: int) -> BernsteinAngularDensity:
        return weights_from_logits(self.states[i], self.J, self.d)

    def weights(self) -> np.ndarray:
        """Weight vectors of every kept state, shape ``(n_states, m)``."""
        return np.array([self.density(i).weights for i in range(self.n_states)])

    def posterior_mean_density(self) -> BernsteinAngularDensity:
        # a mixture of valid weight vectors is itself valid
        w = self.weights().mean(axis=0)
        return BernsteinAngularDensity(self.J, self.d, w, meta={"kind": "posterior_mean"})

    def ess(self) -> np.ndarray:
        return np.array([effective_sample_size(self.states[:, j]) for j in range(self.states.shape[1])])


def _check_sample(sample: PseudoAngleSample, J: int):
    if sample.k and sample.angles.shape[1] != sample.d:
        raise ValueError("sample angles do not match its dimension")


def log_posterior(free_logits, sample: PseudoAngleSample, config: McmcConfig, J: Optional[int] = None) -> float:
    """Unnormalised log posterior of the free logits; ``-inf`` for invalid weights."""
    J = config.resolve_J(sample) if J is None else J
    d = sample.d
    try:
        h = weights_from_logits(free_logits, J, d)
    except InvalidWeights:
        return -math.inf
    c = config.prior_concentration
    try:
        prior = special.dirichlet_log_density(h.weights, [c] * h.weights.size)
    except ValueError:
        return -math.inf
    logits = np.asarray(free_logits, dtype=float)
    log_den = np.logaddexp(math.log(d), sps.logsumexp(logits)) if logits.size else math.log(d)
    jac = float(logits.sum() - logits.size * log_den + math.log(d) - log_den)
    if sample.k == 0:
        return prior + jac
    lik = sps.logsumexp(h.log_basis(sample.angles), b=h.weights[None, :], axis=1)
    return float(lik.sum() + prior + jac)


def log_posterior_grad(free_logits, sample: PseudoAngleSample, config: McmcConfig, J: Optional[int] = None) -> np.ndarray:
    """Analytic gradient of :func:`log_posterior` with respect to the free logits."""
    J = config.resolve_J(sample) if J is None else J
    h = weights_from_logits(free_logits, J, sample.d)
    cmap = constraint_map(J, sample.d)
    c = config.prior_concentration
    free = h.weights[cmap.free_index]
    corners = h.weights[cmap.corner_index]
    g = (c - 1.0) * (1.0 / free + cmap.matrix.T @ (1.0 / corners))
    g += 1.0 / free - 1.0 / (1.0 - free.sum())
    if sample.k:
        basis = np.exp(h.log_basis(sample.angles))
        dh = basis[:, cmap.free_index] + basis[:, cmap.corner_index] @ cmap.matrix
        g += (dh / (basis @ h.weights)[:, None]).sum(axis=0)
    return free * (g - g @ free)


class _Target:
    """Log posterior with O(k) single-coordinate updates.

    With ``e = exp(logits)`` and ``D = d + sum(e)`` the free weights are
    ``e / D``, the corners are ``offset + (M @ e) / D`` and each density
    value is ``h_i = S_i / D + b_i`` with ``S = Bt @ e``.
    """

    def __init__(self, sample: PseudoAngleSample, J: int, c: float, logits: np.ndarray):
        d = sample.d
        cmap = constraint_map(J, d)
        self.d, self.c, self.n_free = d, c, cmap.n_free
        self.offset, self.M = cmap.offset, cmap.matrix
        self.log_prior_const = math.lgamma(c * cmap.m) - cmap.m * math.lgamma(c)
        if sample.k:
            basis = np.exp(weights_from_logits(np.zeros(cmap.n_free), J, d).log_basis(sample.angles))
            self.Bt = np.ascontiguousarray((basis[:, cmap.free_index] + basis[:, cmap.corner_index] @ self.M).T)
            self.b0 = basis[:, cmap.corner_index] @ self.offset
        else:
            self.Bt = np.zeros((cmap.n_free, 0))
            self.b0 = np.zeros(0)
        self.reset(logits)

    def reset(self, logits):
        self.logits = np.array(logits, dtype=float)
        self.e = np.exp(self.logits)
        self.D = self.d + self.e.sum()
        self.S = self.e @ self.Bt
        self.T = self.M @ self.e
        self.sum_logits = float(self.logits.sum())
        self.lp = self._evaluate(self.S, self.T, self.D, self.sum_logits)

    def _evaluate(self, S, T, D, sum_logits) -> float:
        corners = self.offset + T / D
        if np.any(corners <= 0):
            return -math.inf
        log_d = math.log(D)
        sum_log_free = sum_logits - self.n_free * log_d
        lp = (self.c - 1.0) * (sum_log_free + float(np.log(corners).sum())) + self.log_prior_const
        lp += sum_log_free + math.log(self.d) - log_d
        if S.size:
            h = S / D + self.b0
            if np.any(h <= 0):
                return -math.inf
            lp += float(np.log(h).sum())
        return lp

    def propose(self, j: int, new_logit: float):
        if new_logit > 700.0:
            return -math.inf, None
        de = math.exp(new_logit) - self.e[j]
        D = self.D + de
        S = self.S + de * self.Bt[j]
        T = self.T + de * self.M[:, j]
        s = self.sum_logits + (new_logit - self.logits[j])
        return self._evaluate(S, T, D, s), (j, new_logit, de, D, S, T, s)

    def accept(self, lp: float, move):
        j, new_logit, de, D, S, T, s = move
        self.logits[j] = new_logit
        self.e[j] += de
        self.D, self.S, self.T, self.sum_logits, self.lp = D, S, T, s, lp


def run_chain(sample: PseudoAngleSample, config: McmcConfig = McmcConfig(),
              initial_logits: Optional[Sequence[float]] = None) -> McmcChain:
    """Single-component adaptive Metropolis over the free logits.

    Each iteration sweeps every coordinate once. During burn-in, after
    every ``adapt_window`` sweeps the log step of coordinate ``j`` moves by
    ``+/- min(0.05, b^-1/2)`` (``b`` the window count) according to whether
    its window acceptance rate exceeded ``target_accept``. Step sizes are
    frozen after burn-in.
    """
    d = sample.d
    if sample.k < d + 1 and not (config.allow_prior_only and sample.k == 0):
        raise InsufficientExceedances(f"need at least {d + 1} pseudo-angles, got {sample.k}")
    J = config.resolve_J(sample)
    _check_sample(sample, J)
    cmap = constraint_map(J, d)
    n_free = cmap.n_free
    logits0 = np.zeros(n_free) if initial_logits is None else np.asarray(initial_logits, dtype=float)
    target = _Target(sample, J, config.prior_concentration, logits0)
    if not math.isfinite(target.lp):
        raise InvalidWeights("initial logits give an invalid weight vector")

    rng = np.random.default_rng(config.seed)
    log_step = np.full(n_free, math.log(config.initial_step))
    n_keep = config.iterations - config.burn_in
    states = np.empty((n_keep, n_free))
    lp_trace = np.empty(n_keep)
    window_acc = np.zeros(n_free)
    kept_acc = np.zeros(n_free)
    history = [log_step.copy()]
    warn = []
    batch = 0
    for it in range(config.iterations):
        z = rng.standard_normal(n_free)
        log_u = np.log(rng.random(n_free))
        step = np.exp(log_step)
        for j in range(n_free):
            lp_new, move = target.propose(j, target.logits[j] + step[j] * z[j])
            if lp_new - target.lp > log_u[j]:
                target.accept(lp_new, move)
                window_acc[j] += 1
                if it >= config.burn_in:
                    kept_acc[j] += 1
        # refresh the running sums to stop round-off drift
        target.reset(target.logits)
        if (it + 1) % config.adapt_window == 0:
            if n_free and window_acc.sum() == 0:
                msg = f"no proposal accepted in window ending at iteration {it + 1}"
                warn.append(msg)
                log.warning(msg)
            if it < config.burn_in:
                batch += 1
                delta = min(0.05, batch ** -0.5)
                rate = window_acc / config.adapt_window
                log_step = log_step + np.where(rate > config.target_accept, delta, -delta)
            history.append(log_step.copy())
            window_acc[:] = 0
        if it >= config.burn_in:
            states[it - config.burn_in] = target.logits
            lp_trace[it - config.burn_in] = target.lp
    return McmcChain(
        J=J, d=d, states=states, log_posterior_trace=lp_trace,
        acceptance_rate_per_coordinate=kept_acc / n_keep, seed=config.seed,
        step_sizes=np.exp(log_step), step_history=np.array(history),
        burn_in=config.burn_in, warnings=warn, threshold_u=sample.threshold_u,
    )


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    return acov / acov[0]


def effective_sample_size(trace) -> float:
    """Univariate ESS with Geyer's initial positive sequence truncation.

    A constant trace has ESS 1 by convention; the result never exceeds ``n``.
    """
    x = np.asarray(trace, dtype=float)
    n = x.size
    if n < 2 or np.ptp(x) == 0:
        return 1.0
    rho = _autocorrelation(x)
    tau = -1.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(min(n, n / tau))


def thin_indices(n: int, thin: int) -> np.ndarray:
    """Up to ``thin`` evenly spaced indices in ``range(n)``."""
    if n < 1:
        raise ValueError("empty chain")
    return np.unique(np.linspace(0, n - 1, min(thin, n)).round().astype(int))


def posterior_manifold(chain: McmcChain, q_levels=None, x_grid=None,
                       credible_level: float = 0.95, thin: int = 200) -> RegressionManifold:
    """Pointwise posterior mean and central credible band of ``y_{q|x}``.

    For ``d > 2`` each row of ``x_grid`` is a covariate vector.
    """
    if not (0.0 < credible_level < 1.0):
        raise ValueError("credible_level must lie in (0, 1)")
    q_levels = default_q_levels() if q_levels is None else np.asarray(q_levels, dtype=float)
    x_grid = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    if chain.d > 2 and x_grid.ndim == 1:
        x_grid = x_grid.reshape(-1, chain.d - 1)
    idx = thin_indices(chain.n_states, thin)
    draws = np.empty((idx.size, q_levels.size, x_grid.shape[0]))
    rows = np.arange(x_grid.shape[0], dtype=float)[None, :]
    for n, i in enumerate(idx):
        h = chain.density(int(i))
        if chain.d == 2:
            cdf = h.conditional_cdf_vec
        else:
            def cdf(y, r, h=h):
                return h.conditional_cdf_vec(y, x_grid[r.astype(int)])
        try:
            draws[n] = invert_cdf_vec(cdf, q_levels[:, None], x_grid[None, :] if chain.d == 2 else rows)
        except InversionError as err:
            raise InversionError("posterior manifold inversion failed", **{**err.state, "state_index": int(i)}) from err
    tail = (1.0 - credible_level) / 2.0
    lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    mean = draws.mean(axis=0)
    return RegressionManifold(q_levels, x_grid, mean, lower=np.minimum(lo, mean), upper=np.maximum(hi, mean),
                              credible_level=credible_level, meta={"n_states": int(idx.size)})
