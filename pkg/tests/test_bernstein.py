import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sps, stats

from maxreg import bernstein as B
from oracles import exponent_measure_conditional_cdf, random_valid_density

from maxreg.bernstein import (
    BernsteinAngularDensity,
    InsufficientExceedances,
    InvalidWeights,
    QuadratureConfig,
    QuadratureError,
)


# ---------------------------------------------------------------- compositions

def test_enumerate_examples():
    assert B.enumerate_compositions(3, 2) == [(1, 2), (2, 1)]
    assert len(B.enumerate_compositions(4, 3)) == 3
    assert B.enumerate_compositions(3, 3) == [(1, 1, 1)]


@given(st.integers(2, 5), st.integers(0, 10))
def test_enumerate_count_and_order(d, extra):
    J = d + extra
    comps = B.enumerate_compositions(J, d)
    assert len(comps) == math.comb(J - 1, d - 1)
    assert comps == sorted(comps)
    assert all(sum(c) == J and min(c) >= 1 for c in comps)


def test_corners_d2_j4():
    assert B.corner_compositions(4, 2) == [(3, 1), (1, 3)]
    cmap = B.constraint_map(4, 2)
    free = [tuple(cmap.compositions[i]) for i in cmap.free_index]
    assert free == [(2, 2)]


# ---------------------------------------------------------------- weights

@pytest.mark.parametrize("J, d", [(2, 2), (3, 2), (5, 2), (10, 2), (4, 3), (6, 3), (7, 4)])
def test_zero_logits_satisfy_constraints(J, d):
    h = B.uniform_density(J, d)
    total_err, mean_err = h.constraint_residuals()
    assert total_err <= 1e-12
    assert np.max(np.abs(mean_err)) <= 1e-12
    np.testing.assert_allclose(h.weights, 1.0 / h.weights.size, atol=1e-15)


def test_degenerate_j_equals_d():
    h = B.weights_from_logits([], 3, 3)
    assert h.weights.tolist() == [1.0]
    assert h.is_valid()


def test_mean_constraint_d2_j4():
    h = B.weights_from_logits([0.7], 4, 2)
    comps = h.compositions
    assert np.sum(comps[:, 0] * h.weights) == pytest.approx(2.0, abs=1e-12)


def test_wrong_logit_count():
    with pytest.raises(ValueError):
        B.weights_from_logits(np.zeros(3), 10, 2)


def test_negative_corner_raises():
    # mass piled on a near-corner free composition forces a corner below zero
    cmap = B.constraint_map(6, 2)
    logits = np.full(cmap.n_free, -30.0)
    logits[0] = 30.0
    with pytest.raises(InvalidWeights):
        B.weights_from_logits(logits, 6, 2)


@settings(max_examples=200)
@given(st.sampled_from([(5, 2), (10, 2), (6, 3)]), st.integers(0, 2**32 - 1), st.floats(0.1, 3.0))
def test_random_logits_constraints(jd, seed, scale):
    J, d = jd
    rng = np.random.default_rng(seed)
    try:
        h = B.weights_from_logits(rng.normal(0, scale, B.constraint_map(J, d).n_free), J, d)
    except InvalidWeights:
        return
    total_err, mean_err = h.constraint_residuals()
    assert total_err <= 1e-12
    assert np.max(np.abs(mean_err)) <= 1e-10
    assert np.all(h.weights >= 0)


def test_density_rejects_invalid_weights():
    with pytest.raises(InvalidWeights):
        BernsteinAngularDensity(3, 2, np.array([0.9, 0.3]))
    with pytest.raises(InvalidWeights):
        BernsteinAngularDensity(4, 2, np.array([0.6, -0.2, 0.6]))


def test_serialisation_round_trip():
    h = random_valid_density(7, 3, np.random.default_rng(0))
    back = BernsteinAngularDensity.from_dict(h.to_dict())
    assert back.weights.tobytes() == h.weights.tobytes()
    bad = h.to_dict()
    bad["compositions"] = bad["compositions"][::-1]
    with pytest.raises(ValueError):
        BernsteinAngularDensity.from_dict(bad)


# ---------------------------------------------------------------- density

def test_uniform_density_is_one():
    h = B.uniform_density(2, 2)
    np.testing.assert_allclose(B.density(h, np.linspace(0.01, 0.99, 50)), 1.0, rtol=1e-14)
    np.testing.assert_allclose(B.density(B.uniform_density(9, 2), np.linspace(0.01, 0.99, 50)), 1.0, rtol=1e-12)


@pytest.mark.parametrize("J", [3, 8, 25])
def test_density_integral_and_mean(J):
    h = random_valid_density(J, 2, np.random.default_rng(J))
    nodes, weights = np.polynomial.legendre.leggauss(200)
    w = 0.5 * (nodes + 1)
    vals = B.density(h, w)
    assert 0.5 * np.sum(weights * vals) == pytest.approx(1.0, abs=1e-8)
    assert 0.5 * np.sum(weights * w * vals) == pytest.approx(0.5, abs=1e-8)
    assert np.all(vals >= 0)


def test_density_boundary_limit():
    h = B.weights_from_logits([0.2], 4, 2)
    # at w = 0 only the composition with first exponent 1 survives: (1, 3) with Beta(1,3) density 3
    corner = h.weights[h.compositions.tolist().index([1, 3])]
    assert B.density(h, 0.0) == pytest.approx(3 * corner, rel=1e-14)
    assert B.density(h, 1.0) == pytest.approx(3 * h.weights[h.compositions.tolist().index([3, 1])], rel=1e-14)


def test_density_d3_matches_scipy_dirichlet_mixture():
    h = random_valid_density(5, 3, np.random.default_rng(4))
    w = np.array([0.2, 0.3, 0.5])
    want = sum(p * stats.dirichlet.pdf(w, a) for p, a in zip(h.weights, h.compositions))
    assert B.density(h, w) == pytest.approx(want, rel=1e-12)


# ---------------------------------------------------------------- p = 1 conditional CDF

def test_p1_uniform_matches_quadrature():
    h = B.uniform_density(2, 2)
    assert B.conditional_cdf_p1(h, 1.0, 1.0) == pytest.approx(exponent_measure_conditional_cdf(h, 1.0, 1.0), abs=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_p1_matches_quadrature_random(seed):
    rng = np.random.default_rng(seed)
    h = random_valid_density(int(rng.integers(3, 30)), 2, rng)
    for x, y in rng.uniform(0.05, 20, (10, 2)):
        assert B.conditional_cdf_p1(h, y, x) == pytest.approx(exponent_measure_conditional_cdf(h, y, x), abs=1e-6)


def test_p1_limits_and_monotone():
    rng = np.random.default_rng(8)
    h = random_valid_density(12, 2, rng)
    for x in (0.1, 1.0, 10.0):
        assert B.conditional_cdf_p1(h, 1e6, x) == pytest.approx(1.0, abs=1e-6)
        assert B.conditional_cdf_p1(h, 1e-6, x) == pytest.approx(0.0, abs=1e-6)
        ys = np.geomspace(1e-3, 1e4, 400)
        vals = B.conditional_cdf_p1(h, ys, x)
        assert np.all(np.diff(vals) >= -1e-15)
    assert B.conditional_cdf_p1(h, math.inf, 1.0) == 1.0


def test_p1_independence_for_boundary_mass():
    # mass on the corners of a high-degree basis approaches independence
    J = 60
    cmap = B.constraint_map(J, 2)
    h = B.weights_from_logits(np.full(cmap.n_free, -40.0), J, 2)
    assert B.conditional_cdf_p1(h, 1.5, 2.0) == pytest.approx(math.exp(-1 / 1.5), abs=0.05)


def test_p1_requires_d2():
    with pytest.raises(ValueError):
        B.conditional_cdf_p1(B.uniform_density(4, 3), 1.0, 1.0)


def test_p1_domain():
    with pytest.raises(ValueError):
        B.conditional_cdf_p1(B.uniform_density(4, 2), -1.0, 1.0)


def test_method_and_vectorised_agree():
    h = random_valid_density(9, 2, np.random.default_rng(1))
    ys = np.array([0.3, 1.0, 4.0])
    np.testing.assert_allclose(h.conditional_cdf_vec(ys, 2.0), [h.conditional_cdf(y, 2.0) for y in ys], rtol=1e-15)


# ---------------------------------------------------------------- p >= 2 approximation

def test_kernel_integral_matches_incomplete_beta():
    J = 9
    a = np.arange(1, J).astype(float)
    upper = np.array([0.1, 0.5, 0.93])
    got = B._log_kernel_integrals(a, J, upper, 128)
    want = np.log(sps.beta(a, J - a + 1)[None, :] * sps.betainc(a[None, :], J - a[None, :] + 1, upper[:, None]))
    np.testing.assert_allclose(got, want, rtol=1e-7)


def test_approx_limits_and_monotone():
    h = random_valid_density(8, 3, np.random.default_rng(3))
    x = np.array([2.0, 3.0])
    ys = np.geomspace(0.01, 1e5, 60)
    vals = B.conditional_cdf_approx(h, ys, x)
    assert np.all(np.diff(vals) >= -1e-12)
    assert vals[-1] == pytest.approx(1.0, abs=1e-6)
    assert B.conditional_cdf_approx(h, math.inf, x) == 1.0


def test_approx_symmetry_under_covariate_swap():
    # weights invariant under swapping the first two coordinates
    J, d = 7, 3
    cmap = B.constraint_map(J, d)
    comps = [tuple(c) for c in cmap.compositions]
    free = [comps[i] for i in cmap.free_index]
    rng = np.random.default_rng(0)
    logits = {}
    for c in free:
        key = tuple(sorted(c[:2])) + (c[2],)
        logits.setdefault(key, rng.normal(0, 0.3))
    h = B.weights_from_logits([logits[tuple(sorted(c[:2])) + (c[2],)] for c in free], J, d)
    for y in (0.5, 2.0, 9.0):
        assert B.conditional_cdf_approx(h, y, [1.2, 4.0]) == pytest.approx(B.conditional_cdf_approx(h, y, [4.0, 1.2]), rel=1e-12)


def test_approx_closed_form_oracle():
    # with the kernel integral in closed form the whole ratio is available exactly
    h = random_valid_density(6, 3, np.random.default_rng(6))
    x = np.array([1.5, 0.8])
    y = 2.5
    s = x.sum()
    a = h.compositions[:, -1].astype(float)
    J = h.J
    logc = (np.log(h.weights) - (sps.gammaln(h.compositions).sum(axis=1) - sps.gammaln(J))
            + (np.log(x)[None, :] * (h.compositions[:, :2] - 1)).sum(axis=1) + (a - J - 1) * np.log(s))
    full = np.exp(logc) * sps.beta(a, J - a + 1)
    part = full * sps.betainc(a, J - a + 1, y / (y + s))
    assert B.conditional_cdf_approx(h, y, x) == pytest.approx(part.sum() / full.sum(), rel=1e-10)


def test_approx_below_threshold_warns():
    h = B.uniform_density(5, 3)
    with pytest.warns(UserWarning):
        B.conditional_cdf_approx(h, 1.0, [1.0, 1.0], threshold=10.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        B.conditional_cdf_approx(h, 20.0, [1.0, 1.0], threshold=10.0)


def test_approx_non_convergence_raises():
    with pytest.raises(QuadratureError):
        B.conditional_cdf_approx(B.uniform_density(5, 3), 1.0, [1.0, 1.0], QuadratureConfig(order=2, max_order=2))


def test_approx_wrong_dimension():
    with pytest.raises(ValueError):
        B.conditional_cdf_approx(B.uniform_density(5, 3), 1.0, [1.0, 1.0, 1.0])


# ---------------------------------------------------------------- decomposition

def test_decompose_arithmetic():
    data = np.array([[3.0, 1.0], [0.1, 0.1], [0.2, 0.1], [5.0, 5.0], [0.1, 0.3], [2.0, 6.0]])
    s = B.decompose(data, 0.5)
    row = np.flatnonzero(s.radii == 4.0)[0]
    np.testing.assert_allclose(s.angles[row], [0.75, 0.25])
    assert np.all(s.radii > s.threshold_u)


def test_decompose_k_and_simplex():
    rng = np.random.default_rng(0)
    data = -1.0 / np.log(rng.random((5000, 3)))
    s = B.decompose(data, 0.95)
    assert s.k == 250
    assert np.max(np.abs(s.angles.sum(axis=1) - 1)) <= 1e-12


def test_decompose_errors():
    with pytest.raises(InsufficientExceedances):
        B.decompose(np.ones((10, 2)) + np.arange(10)[:, None], 0.9)
    with pytest.raises(ValueError):
        B.decompose(np.array([[1.0, -1.0]] * 10), 0.5)


def test_sample_pairs_matches_conditional():
    h = random_valid_density(6, 2, np.random.default_rng(2))
    data = B.sample_pairs(h, 3000, seed=4)
    assert stats.kstest(np.exp(-1 / data[:, 0]), "uniform").pvalue > 1e-3
    pit = h.conditional_cdf_vec(data[:, 1], data[:, 0])
    assert stats.kstest(pit, "uniform").pvalue > 1e-3
