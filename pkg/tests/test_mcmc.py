import math

import numpy as np
import pytest
from oracles import rejection_oracle
from scipy import stats

from maxreg import bernstein as B
from maxreg import mcmc, models, special
from maxreg._roots import InversionError
from maxreg.mcmc import McmcConfig


@pytest.fixture(scope="module")
def small_sample():
    data = models.sample(models.HuslerReiss(0.6), 600, seed=12)
    return B.decompose(data, 0.95)


def test_config_validation():
    with pytest.raises(ValueError):
        McmcConfig(iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        McmcConfig(prior_concentration=0.0)
    with pytest.raises(ValueError):
        McmcConfig(target_accept=1.0)
    cfg = McmcConfig()
    assert (cfg.iterations, cfg.burn_in, cfg.prior_concentration, cfg.target_accept, cfg.adapt_window) == (
        10000, 4000, 0.1, 0.44, 50)


def test_auto_j_is_k(small_sample):
    assert McmcConfig().resolve_J(small_sample) == small_sample.k


def test_log_posterior_prior_only(small_sample):
    cfg = McmcConfig(J=6, prior_concentration=0.7)
    empty = B.PseudoAngleSample.empty(2)
    logits = np.array([0.3, -0.2, 0.1])
    h = B.weights_from_logits(logits, 6, 2)
    prior = special.dirichlet_log_density(h.weights, [0.7] * 5)
    log_d = math.log(2 + np.exp(logits).sum())
    jac = logits.sum() - 3 * log_d + math.log(2) - log_d
    assert mcmc.log_posterior(logits, empty, cfg) == pytest.approx(prior + jac, rel=1e-13)


def test_log_posterior_likelihood_additivity(small_sample):
    cfg = McmcConfig(J=8)
    logits = np.random.default_rng(1).normal(0, 0.3, 5)
    base = mcmc.log_posterior(logits, small_sample, cfg)
    w = small_sample.angles[0]
    doubled = B.PseudoAngleSample(np.vstack([small_sample.angles, w]), np.append(small_sample.radii, 1.0),
                                  small_sample.threshold_u, 0.95, 2)
    h = B.weights_from_logits(logits, 8, 2)
    assert mcmc.log_posterior(logits, doubled, cfg) - base == pytest.approx(math.log(B.density(h, w[0])), rel=1e-10)


def test_log_posterior_invalid_is_minus_inf(small_sample):
    cfg = McmcConfig(J=6)
    logits = np.array([30.0, -30.0, -30.0])
    assert mcmc.log_posterior(logits, small_sample, cfg) == -math.inf


def test_gradient_matches_central_differences(small_sample):
    cfg = McmcConfig(J=10)
    rng = np.random.default_rng(3)
    logits = rng.normal(0, 0.3, 7)
    g = mcmc.log_posterior_grad(logits, small_sample, cfg)
    h = 1e-6
    fd = np.array([
        (mcmc.log_posterior(logits + h * e, small_sample, cfg) - mcmc.log_posterior(logits - h * e, small_sample, cfg)) / (2 * h)
        for e in np.eye(logits.size)
    ])
    np.testing.assert_allclose(g, fd, atol=1e-4)


def test_incremental_target_matches_reference(small_sample):
    cfg = McmcConfig(J=10, prior_concentration=0.1)
    rng = np.random.default_rng(4)
    logits = rng.normal(0, 0.3, 7)
    t = mcmc._Target(small_sample, 10, 0.1, logits)
    assert t.lp == pytest.approx(mcmc.log_posterior(logits, small_sample, cfg), rel=1e-12)
    for j in range(7):
        new = logits.copy()
        new[j] += rng.normal()
        lp, move = t.propose(j, new[j])
        assert lp == pytest.approx(mcmc.log_posterior(new, small_sample, cfg), rel=1e-10, abs=1e-10)


def test_run_chain_determinism_and_shapes(small_sample):
    cfg = McmcConfig(iterations=300, burn_in=100, J=12, seed=5)
    a = mcmc.run_chain(small_sample, cfg)
    b = mcmc.run_chain(small_sample, cfg)
    assert a.states.shape == (200, 9)
    assert a.states.tobytes() == b.states.tobytes()
    assert a.log_posterior_trace.tobytes() == b.log_posterior_trace.tobytes()
    assert np.all((a.acceptance_rate_per_coordinate >= 0) & (a.acceptance_rate_per_coordinate <= 1))
    c = mcmc.run_chain(small_sample, McmcConfig(iterations=300, burn_in=100, J=12, seed=6))
    assert c.states.tobytes() != a.states.tobytes()


def test_step_sizes_frozen_after_burn_in(small_sample):
    cfg = McmcConfig(iterations=600, burn_in=300, J=10, adapt_window=50)
    chain = mcmc.run_chain(small_sample, cfg)
    hist = chain.step_history
    n_burn_windows = cfg.burn_in // cfg.adapt_window
    assert np.any(hist[n_burn_windows] != hist[0])
    assert np.all(hist[n_burn_windows:] == hist[n_burn_windows])
    np.testing.assert_array_equal(chain.step_sizes, np.exp(hist[-1]))


def test_kept_states_satisfy_constraints(small_sample):
    chain = mcmc.run_chain(small_sample, McmcConfig(iterations=1500, burn_in=500, J=small_sample.k, seed=2))
    rng = np.random.default_rng(0)
    for i in rng.choice(chain.n_states, max(1, chain.n_states // 100), replace=False):
        h = chain.density(int(i))
        total, means = h.constraint_residuals()
        assert total <= 1e-12 and np.max(np.abs(means)) <= 1e-10
    assert chain.posterior_mean_density().is_valid()


def test_insufficient_exceedances():
    with pytest.raises(B.InsufficientExceedances):
        mcmc.run_chain(B.PseudoAngleSample.empty(2), McmcConfig(iterations=10, burn_in=5, J=4))


def test_zero_acceptance_window_warns(small_sample):
    cfg = McmcConfig(iterations=100, burn_in=50, J=8, initial_step=1e6, adapt_window=50)
    chain = mcmc.run_chain(small_sample, cfg)
    assert chain.warnings and "no proposal accepted" in chain.warnings[0]


def test_chain_matchesrejection_oracle():
    data = models.sample(models.Logistic(0.6), 400, seed=3)
    sample = B.decompose(data, 0.95)
    J, c = 5, 1.5
    chain = mcmc.run_chain(sample, McmcConfig(iterations=52000, burn_in=2000, J=J, prior_concentration=c, seed=9))
    oracle = rejection_oracle(sample, J, c, 50000, seed=10)
    free_index = B.constraint_map(J, 2).free_index
    weights = np.array([chain.density(i).weights[free_index] for i in range(chain.n_states)])
    for j in range(2):
        ks = stats.ks_2samp(weights[:, j], oracle[:, j]).statistic
        assert ks < 0.05


def test_prior_only_chain_matches_constrained_uniform():
    # c = 1 makes the prior uniform on the feasible weights
    J = 5
    cfg = McmcConfig(iterations=42000, burn_in=2000, J=J, prior_concentration=1.0, allow_prior_only=True, seed=1)
    chain = mcmc.run_chain(B.PseudoAngleSample.empty(2), cfg)
    oracle = rejection_oracle(B.PseudoAngleSample.empty(2), J, 1.0, 40000, seed=2)
    free_index = B.constraint_map(J, 2).free_index
    means = np.mean([chain.density(i).weights[free_index] for i in range(0, chain.n_states, 10)], axis=0)
    np.testing.assert_allclose(means, oracle.mean(axis=0), atol=0.01)


# ---------------------------------------------------------------- ESS

def test_ess_iid():
    x = np.random.default_rng(0).standard_normal(4000)
    assert mcmc.effective_sample_size(x) == pytest.approx(4000, rel=0.15)


def test_ess_constant_trace():
    assert mcmc.effective_sample_size(np.full(500, 2.5)) == 1.0


def test_ess_ar1():
    rng = np.random.default_rng(1)
    n, phi = 10000, 0.9
    x = np.empty(n)
    x[0] = rng.standard_normal() / math.sqrt(1 - phi ** 2)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + rng.standard_normal()
    assert mcmc.effective_sample_size(x) == pytest.approx(n * (1 - phi) / (1 + phi), rel=0.2)


def test_ess_bounded_by_n():
    x = np.tile([1.0, -1.0], 500)
    assert mcmc.effective_sample_size(x) <= 1000


# ---------------------------------------------------------------- posterior manifold

def _frozen_chain(states, J):
    n = states.shape[0]
    return mcmc.McmcChain(J=J, d=2, states=states, log_posterior_trace=np.zeros(n),
                          acceptance_rate_per_coordinate=np.zeros(states.shape[1]), seed=0,
                          step_sizes=np.ones(states.shape[1]), step_history=np.zeros((1, states.shape[1])))


def test_identical_states_collapse_bands():
    chain = _frozen_chain(np.tile([0.3, -0.1], (50, 1)), 5)
    man = mcmc.posterior_manifold(chain, [0.2, 0.8], np.geomspace(0.5, 10, 8))
    np.testing.assert_allclose(man.lower, man.values, rtol=1e-12)
    np.testing.assert_allclose(man.upper, man.values, rtol=1e-12)


def test_bands_nested_in_credible_level(small_sample):
    chain = mcmc.run_chain(small_sample, McmcConfig(iterations=800, burn_in=300, J=10, seed=1))
    x = np.geomspace(0.5, 20, 10)
    narrow = mcmc.posterior_manifold(chain, [0.5], x, credible_level=0.5, thin=50)
    wide = mcmc.posterior_manifold(chain, [0.5], x, credible_level=0.95, thin=50)
    assert np.all(wide.lower <= narrow.lower + 1e-12)
    assert np.all(wide.upper >= narrow.upper - 1e-12)
    assert np.all(narrow.lower <= narrow.values) and np.all(narrow.values <= narrow.upper)


def _posterior_line(model, seed):
    data = models.sample(model, 2000, seed=seed)
    chain = mcmc.run_chain(B.decompose(data, 0.9), McmcConfig(iterations=1500, burn_in=700, seed=3))
    return mcmc.posterior_manifold(chain, [0.5], np.linspace(2.0, 20.0, 10), thin=40).values[0]


def test_independence_posterior_nearly_flat_in_x():
    # point masses at the simplex vertices are out of reach of a finite mixture,
    # so only near-flatness relative to a dependent fit is expected
    weak = _posterior_line(models.Logistic(1.0), 8)
    strong = _posterior_line(models.Logistic(0.3), 8)
    assert weak[0] == pytest.approx(models.independence_quantile(0.5), rel=0.05)
    weak_slope = (weak[-1] - weak[0]) / 18.0
    strong_slope = (strong[-1] - strong[0]) / 18.0
    assert weak_slope < 0.1 * strong_slope


def test_thin_indices():
    assert mcmc.thin_indices(5, 200).tolist() == [0, 1, 2, 3, 4]
    idx = mcmc.thin_indices(6000, 200)
    assert idx.size == 200 and idx[0] == 0 and idx[-1] == 5999


def test_inversion_failure_reports_state(monkeypatch):
    chain = _frozen_chain(np.zeros((3, 2)), 5)

    def boom(*args, **kwargs):
        raise InversionError("no bracket", q=0.5, x=1.0)

    monkeypatch.setattr(mcmc, "invert_cdf_vec", boom)
    with pytest.raises(InversionError) as info:
        mcmc.posterior_manifold(chain, [0.5], [1.0])
    assert info.value.state["state_index"] == 0


def test_multicovariate_posterior_manifold():
    rng = np.random.default_rng(0)
    data = -1.0 / np.log(rng.random((400, 3)))
    sample = B.decompose(data, 0.95)
    chain = mcmc.run_chain(sample, McmcConfig(iterations=200, burn_in=100, J=6, seed=0))
    xg = np.array([[1.0, 2.0], [3.0, 3.0]])
    man = mcmc.posterior_manifold(chain, [0.3, 0.7], xg, thin=5)
    assert man.values.shape == (2, 2)
    assert man.monotone_in_q()
