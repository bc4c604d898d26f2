"""Costs, the reformulation identity, responsibilities and gradients."""

import math

import numpy as np
import pytest

from ellipmix.checks import (original_gradient_fd_error,
                             reformulated_gradient_fd_error)
from ellipmix.generators import FAMILY_NAMES
from ellipmix.mixture import (Dataset, DecompositionError, MixtureParams,
                              ReformulatedParams, decompose, from_original,
                              fixed_point_residuals, nll, params_from_json,
                              params_to_json, reformulate, reformulated_cost,
                              reformulated_gradients, responsibilities,
                              to_original)


def rand_spd(d, rng):
    a = rng.standard_normal((d, d))
    return a @ a.T + d * np.eye(d)


def random_mixture(family, rng, m=3, k=2):
    return MixtureParams(rng.dirichlet(np.ones(k) * 4),
                         [rng.standard_normal(m) for _ in range(k)],
                         [rand_spd(m, rng) for _ in range(k)],
                         [family] * k)


def test_responsibilities_single_component():
    p = MixtureParams([1.0], [np.zeros(2)], [np.eye(2)], ["gaussian"])
    xi = responsibilities(p, Dataset(np.random.default_rng(0).standard_normal((5, 2))))
    np.testing.assert_allclose(xi, 1.0)


def test_responsibilities_identical_components():
    p = MixtureParams([0.5, 0.5], [np.zeros(2)] * 2, [np.eye(2)] * 2,
                      ["cauchy"] * 2)
    xi = responsibilities(p, Dataset(np.random.default_rng(1).standard_normal((7, 2))))
    np.testing.assert_allclose(xi, 0.5)


def test_responsibilities_far_apart():
    p = MixtureParams([0.5, 0.5], [np.zeros(1), np.array([50.0])],
                      [np.eye(1)] * 2, ["gaussian"] * 2)
    xi = responsibilities(p, Dataset(np.array([[0.0]])))
    assert xi[0, 0] > 1 - 1e-10 and xi[0, 1] < 1e-10


def test_responsibilities_rows_sum_to_one():
    rng = np.random.default_rng(2)
    p = random_mixture("logistic", rng)
    xi = responsibilities(p, Dataset(rng.standard_normal((40, 3))))
    np.testing.assert_allclose(xi.sum(axis=1), 1.0, atol=1e-12)


def test_nll_reference_value_and_additivity():
    p = MixtureParams([1.0], [np.zeros(2)], [np.eye(2)], ["gaussian"])
    d = Dataset(np.zeros((10, 2)))
    assert nll(p, d) == pytest.approx(10 * math.log(2 * math.pi))
    rng = np.random.default_rng(3)
    x = rng.standard_normal((20, 2))
    assert nll(p, Dataset(np.vstack([x, x]))) == pytest.approx(
        2 * nll(p, Dataset(x)), rel=1e-12)


def test_nll_matches_naive_sum():
    rng = np.random.default_rng(4)
    p = random_mixture("cauchy", rng, m=2, k=2)
    x = rng.standard_normal((5, 2))
    naive = 0.0
    for row in x:
        dens = sum(p.weights[k] * math.exp(p.component(k).log_pdf(row))
                   for k in range(2))
        naive -= math.log(dens)
    assert nll(p, Dataset(x)) == pytest.approx(naive, rel=1e-10)


def test_reformulate_identity_block():
    np.testing.assert_allclose(reformulate(np.zeros(3), np.eye(3), 1.0),
                               np.eye(4))


def test_decompose_round_trip_and_determinant():
    rng = np.random.default_rng(5)
    for _ in range(100):
        m = int(rng.integers(1, 6))
        mu, sig = rng.standard_normal(m), rand_spd(m, rng)
        lam = float(rng.uniform(0.1, 10))
        block = reformulate(mu, sig, lam)
        mu2, sig2, lam2 = decompose(block)
        np.testing.assert_allclose(mu2, mu, atol=1e-12)
        np.testing.assert_allclose(sig2, sig, atol=1e-11)
        assert lam2 == pytest.approx(lam, abs=1e-14)
        det = np.linalg.det(block)
        assert det == pytest.approx(lam * np.linalg.det(sig), rel=1e-10)


def test_decompose_rejects_invalid_blocks():
    bad = np.eye(3)
    bad[2, 2] = -1.0
    with pytest.raises(DecompositionError):
        decompose(bad)
    # corner too large: the Schur complement loses definiteness
    mu = np.array([3.0, 0.0])
    block = reformulate(mu, np.eye(2), 1.0)
    block[:2, :2] -= 9.5 * np.outer([1, 0], [1, 0])
    with pytest.raises(DecompositionError):
        decompose(block)


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_cost_identity_every_family(family):
    """reformulated cost at (reformulate(mu, Sigma, lam), c = 1/lam) == nll."""
    rng = np.random.default_rng(hash(family) % 2 ** 32)
    worst = 0.0
    for _ in range(13):
        m = int(rng.integers(1, 5))
        k = int(rng.integers(1, 4))
        params = random_mixture(family, rng, m=m, k=k)
        lams = rng.uniform(0.2, 5.0, k)
        blocks = [reformulate(params.means[i], params.scatters[i], lams[i])
                  for i in range(k)]
        ref = ReformulatedParams(params.weights, blocks, 1.0 / lams,
                                 [family] * k)
        data = Dataset(rng.standard_normal((30, m)) * rng.uniform(0.5, 2.0))
        worst = max(worst, abs(nll(params, data) - reformulated_cost(ref, data)))
    assert worst < 1e-10


def test_reformulated_cost_infinite_when_all_components_vanish():
    params = MixtureParams([1.0], [np.zeros(1)], [np.eye(1)], ["cauchy"])
    ref = from_original(params, lam=1.0)
    # raising c beyond min ttilde puts every argument out of domain
    ref = ReformulatedParams(ref.weights, ref.blocks, np.array([50.0]),
                             ref.generators)
    cost = reformulated_cost(ref, Dataset(np.array([[0.1]])))
    assert cost == math.inf


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_gradients_match_finite_differences(family):
    rng = np.random.default_rng(abs(hash("fd" + family)) % 2 ** 32)
    for _ in range(20):
        assert reformulated_gradient_fd_error(family, rng) < 1e-5
        assert original_gradient_fd_error(family, rng) < 1e-5


def test_gaussian_mle_is_stationary():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((200, 2)) @ np.array([[1.0, 0.2], [0.0, 0.7]])
    mu = x.mean(axis=0)
    sig = np.cov(x.T, bias=True)
    from ellipmix.mixture import original_gradients

    params = MixtureParams([1.0], [mu], [sig], ["gaussian"])
    gm, gs, gl = original_gradients(params, Dataset(x))
    assert np.linalg.norm(gm[0]) < 1e-8
    assert np.linalg.norm(gs[0]) < 1e-8
    assert abs(gl[0]) < 1e-10


def test_gaussian_second_moment_block_is_stationary():
    # K=1: the augmented block equal to the second moment of y with c = 1
    # zeroes the block gradient
    rng = np.random.default_rng(7)
    x = rng.standard_normal((300, 2)) + np.array([0.5, -1.0])
    data = Dataset(x)
    y = data.y
    block = (y.T @ y) / data.n
    ref = ReformulatedParams([1.0], [block], np.array([1.0]), ["gaussian"])
    gb, gl, gc = reformulated_gradients(ref, data)
    assert np.linalg.norm(gb[0]) < 1e-8
    assert abs(gc[0]) < 1e-9


def test_fixed_point_residuals_positive_off_optimum():
    rng = np.random.default_rng(8)
    params = random_mixture("gaussian", rng)
    ref = from_original(params, lam=1.0)
    res = fixed_point_residuals(ref, Dataset(rng.standard_normal((50, 3))))
    assert all(r["scatter"] > 1e-3 for r in res)


def test_weighted_rows_equal_duplication():
    rng = np.random.default_rng(9)
    params = random_mixture("laplace", rng, m=2, k=2)
    x = rng.standard_normal((15, 2))
    doubled = nll(params, Dataset(np.vstack([x, x[:5]])))
    weighted = nll(params, Dataset(x, weights=np.r_[np.full(5, 2.0), np.ones(10)]))
    assert weighted == pytest.approx(doubled, rel=1e-12)


def test_model_json_round_trip():
    rng = np.random.default_rng(10)
    params = random_mixture("weib0.9", rng, m=2, k=3)
    doc = params_to_json(params, solver_meta={"solver": "our"},
                         scales=[1.0, 2.0, 3.0])
    back = params_from_json(doc)
    assert doc["dim"] == 2
    assert doc["solver_meta"]["scales"] == [1.0, 2.0, 3.0]
    for k in range(3):
        np.testing.assert_array_equal(back.means[k], params.means[k])
        np.testing.assert_array_equal(back.scatters[k], params.scatters[k])
        assert back.generators[k].name == "weib0.9"
    np.testing.assert_array_equal(back.weights, params.weights)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        Dataset(np.ones((3, 2)), weights=np.array([1.0, -1.0, 0.5]))
    d = Dataset(np.ones((3, 2)))
    np.testing.assert_array_equal(d.y[:, -1], 1.0)
