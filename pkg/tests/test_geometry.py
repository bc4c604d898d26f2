"""SPD primitives, the product manifold, and the metric identity."""

import numpy as np
import pytest

from ellipmix.checks import metric_identity_residuals
from ellipmix.generators import FAMILY_NAMES, get_generator
from ellipmix.geometry import (ProductPoint, ProductTangent, RetractionError,
                               mean_metric_coefficient, product_inner,
                               product_retract, product_transport,
                               product_zero_like,
                               reformulation_metric_residual, spd_distance,
                               spd_egrad_to_rgrad, spd_exp, spd_inner,
                               spd_retract, spd_transport, sym)


def rand_spd(d, rng, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T + d * np.eye(d))


def rand_sym(d, rng, scale=1.0):
    return scale * sym(rng.standard_normal((d, d)))


def test_spd_inner_reference_values():
    eye = np.eye(2)
    assert spd_inner(eye, eye, eye) == pytest.approx(2.0)
    assert spd_inner(2 * eye, eye, eye) == pytest.approx(0.5)


def test_spd_inner_symmetric_in_arguments():
    rng = np.random.default_rng(0)
    for _ in range(10):
        s = rand_spd(3, rng)
        a, b = rand_sym(3, rng), rand_sym(3, rng)
        assert spd_inner(s, a, b) == pytest.approx(spd_inner(s, b, a, ), abs=1e-12)


def test_egrad_to_rgrad():
    g = rand_sym(2, np.random.default_rng(1))
    np.testing.assert_allclose(spd_egrad_to_rgrad(np.eye(2), g), g)
    np.testing.assert_allclose(
        spd_egrad_to_rgrad(np.diag([2.0, 1.0]), np.eye(2)), np.diag([4.0, 1.0]))


def test_rgrad_defining_property():
    # <rgrad, xi>_Sigma = tr(sym(G) xi) for any tangent xi
    rng = np.random.default_rng(2)
    s = rand_spd(3, rng)
    g = rng.standard_normal((3, 3))
    rg = spd_egrad_to_rgrad(s, g)
    for _ in range(100):
        xi = rand_sym(3, rng)
        lhs = spd_inner(s, rg, xi)
        rhs = float(np.tensordot(sym(g), xi))
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_retraction_at_zero_and_scalar_series():
    rng = np.random.default_rng(3)
    s = rand_spd(3, rng)
    np.testing.assert_array_equal(spd_retract(s, np.zeros((3, 3))), s)
    eps = 1e-3
    got = spd_retract(np.eye(2), eps * np.eye(2))
    np.testing.assert_allclose(got, (1 + eps + eps ** 2 / 2) * np.eye(2))
    assert np.abs(got - np.exp(eps) * np.eye(2)).max() < eps ** 3


def test_retraction_first_order_agreement():
    rng = np.random.default_rng(4)
    s = rand_spd(3, rng)
    xi = rand_sym(3, rng)
    errs = [np.linalg.norm(spd_retract(s, t * xi) - (s + t * xi))
            for t in (1e-2, 5e-3, 2.5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_retraction_third_order_vs_exponential():
    rng = np.random.default_rng(5)
    s = rand_spd(3, rng)
    xi = rand_sym(3, rng, 0.5)
    d = [spd_distance(spd_retract(s, t * xi), spd_exp(s, t * xi))
         for t in (0.2, 0.1, 0.05)]
    assert d[0] / d[1] == pytest.approx(8.0, rel=0.25)
    assert d[1] / d[2] == pytest.approx(8.0, rel=0.25)


def test_retraction_failure_is_retryable():
    # Exact arithmetic keeps the second-order retraction inside the cone
    # (I + eta + eta^2/2 = (I + (I+eta)^2)/2 >= I/2), so only numerical
    # breakdown can reject a step; overflow must surface as RetractionError.
    with pytest.raises(RetractionError):
        spd_retract(np.eye(2), 1e200 * np.eye(2))


def test_transport_reference_and_isometry():
    rng = np.random.default_rng(6)
    xi = rand_sym(2, rng)
    np.testing.assert_allclose(spd_transport(np.eye(2), np.eye(2), xi), xi,
                               atol=1e-12)
    np.testing.assert_allclose(
        spd_transport(np.eye(2), 4 * np.eye(2), np.eye(2)), 4 * np.eye(2),
        atol=1e-12)
    for _ in range(20):
        s1, s2 = rand_spd(3, rng), rand_spd(3, rng)
        a, b = rand_sym(3, rng), rand_sym(3, rng)
        lhs = spd_inner(s2, spd_transport(s1, s2, a), spd_transport(s1, s2, b))
        rhs = spd_inner(s1, a, b)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_metric_identity_trivial_cases():
    # only the scalar moves: both sides are (dlam/lam)^2 / 2
    r = reformulation_metric_residual(
        np.zeros(2), np.eye(2), 2.0, np.zeros(2), np.zeros((2, 2)), 1e-3)
    assert r < 1e-18
    # no scalar motion: the remaining mean/scatter identity is exact too
    rng = np.random.default_rng(7)
    r = reformulation_metric_residual(
        rng.standard_normal(3), rand_spd(3, rng), 1.0,
        1e-4 * rng.standard_normal(3), rand_sym(3, rng, 1e-4), 0.0)
    assert r < 1e-15


def test_metric_identity_random_instances():
    res = metric_identity_residuals(np.random.default_rng(8), count=100,
                                    magnitude=1e-4)
    assert res.max() < 1e-8


def test_mean_metric_gaussian_is_one():
    g = get_generator("gaussian")
    for m in (1, 2, 8):
        assert mean_metric_coefficient(g, m) == pytest.approx(1.0, abs=1e-6)


def test_mean_metric_cauchy_closed_form():
    # (M+1)/(M+3), the classical location information of the Cauchy family
    g = get_generator("cauchy")
    for m in (1, 2, 5):
        want = (m + 1) / (m + 3)
        assert mean_metric_coefficient(g, m) == pytest.approx(want, rel=1e-8)


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_mean_metric_positive(family):
    v = mean_metric_coefficient(get_generator(family), 4)
    assert v > 0


def test_mean_metric_divergence_reported_as_inf():
    with pytest.warns(RuntimeWarning):
        v = mean_metric_coefficient(get_generator("weib0.9"), 1)
    assert v == np.inf


def _random_product_point(rng, k=2, d=3, with_scalars=True, with_means=True):
    return ProductPoint(
        [rand_spd(d, rng) for _ in range(k)],
        rng.standard_normal(k),
        rng.standard_normal(k) if with_scalars else None,
        [rng.standard_normal(d) for _ in range(k)] if with_means else None)


def test_product_zero_tangent_is_identity():
    rng = np.random.default_rng(9)
    p = _random_product_point(rng)
    q = product_retract(p, product_zero_like(p))
    for a, b in zip(p.spd_blocks, q.spd_blocks):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(q.weights, p.weights, atol=1e-15)
    np.testing.assert_array_equal(q.log_scalars, p.log_scalars)


def test_product_inner_is_sum_of_blocks():
    rng = np.random.default_rng(10)
    p = _random_product_point(rng, k=2, d=2)
    u = ProductTangent([rand_sym(2, rng) for _ in range(2)],
                       rng.standard_normal(2), rng.standard_normal(2),
                       [rng.standard_normal(2) for _ in range(2)])
    total = product_inner(p, u, u)
    parts = sum(spd_inner(p.spd_blocks[i], u.spd_parts[i], u.spd_parts[i])
                for i in range(2))
    parts += u.logits @ u.logits + u.log_scalars @ u.log_scalars
    parts += sum(m @ m for m in u.means)
    assert total == pytest.approx(parts, rel=1e-12)


def test_product_transport_preserves_spd_norms():
    rng = np.random.default_rng(11)
    p = _random_product_point(rng)
    u = ProductTangent([rand_sym(3, rng) for _ in range(2)],
                       rng.standard_normal(2), rng.standard_normal(2),
                       [rng.standard_normal(3) for _ in range(2)])
    q = product_retract(p, u.scaled(0.1))
    t = product_transport(p, q, u)
    for i in range(2):
        a = spd_inner(p.spd_blocks[i], u.spd_parts[i], u.spd_parts[i])
        b = spd_inner(q.spd_blocks[i], t.spd_parts[i], t.spd_parts[i])
        assert b == pytest.approx(a, rel=1e-10)
