"""Components: density values, unit mass, sampling consistency."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import chi2

from ellipmix.elliptical import EllipticalComponent, SingularScatterError
from ellipmix.generators import FAMILY_NAMES, get_generator


def test_log_pdf_reference_values():
    comp = EllipticalComponent(np.zeros(2), np.eye(2), "gaussian")
    assert comp.log_pdf(np.zeros(2)) == pytest.approx(-math.log(2 * math.pi))
    comp = EllipticalComponent(np.zeros(2), np.diag([4.0, 1.0]), "gaussian")
    want = -math.log(2 * math.pi) - 0.5 * math.log(4.0) - 0.5
    assert comp.log_pdf(np.array([2.0, 0.0])) == pytest.approx(want)
    comp = EllipticalComponent(np.zeros(1), np.eye(1), "cauchy")
    assert comp.log_pdf(np.array([1.0])) == pytest.approx(math.log(1 / (2 * math.pi)))


def test_singular_scatter_rejected():
    with pytest.raises(SingularScatterError):
        EllipticalComponent(np.zeros(2), np.diag([1.0, 1e-15]), "gaussian")
    with pytest.raises(ValueError):
        EllipticalComponent(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]),
                            "gaussian")


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_pdf_integrates_to_one_1d(family):
    comp = EllipticalComponent(np.array([0.3]), np.array([[1.7]]), family)
    f = lambda x: math.exp(comp.log_pdf(np.array([x])))
    # split at the mean so the integrable center singularities sit on endpoints
    mass = (integrate.quad(f, -np.inf, 0.3, limit=400)[0]
            + integrate.quad(f, 0.3, np.inf, limit=400)[0])
    assert mass == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_pdf_integrates_to_one_2d_polar_grid(family):
    # polar r x theta grid around the mean handles heavy tails and the
    # integrable center singularities
    mu = np.array([0.4, -0.2])
    sig = np.array([[1.5, 0.4], [0.4, 0.8]])
    comp = EllipticalComponent(mu, sig, family)
    thetas = np.linspace(0.0, 2 * math.pi, 65)[:-1]
    mass = 0.0
    for th in thetas:
        v = np.array([math.cos(th), math.sin(th)])
        g = lambda r: r * math.exp(comp.log_pdf(mu + r * v))
        mass += integrate.quad(g, 0, np.inf, limit=400)[0]
    mass *= 2 * math.pi / len(thetas)
    assert mass == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_pdf_integrates_to_one_8d_radial(family):
    # radial reduction with an independent quadrature (tanh-sinh via mpmath)
    mpmath = pytest.importorskip("mpmath")
    m = 8
    gen = get_generator(family)
    log_kappa = gen.log_normalizer(m)
    area = 2 * math.pi ** (m / 2) / math.gamma(m / 2)
    f = lambda r: mpmath.exp(gen.log_g(float(r) ** 2, m)) * mpmath.mpf(r) ** (m - 1)
    mpmath.mp.dps = 30
    radial = float(mpmath.quad(f, [0, 1, 10, 100, mpmath.inf]))
    mass = math.exp(log_kappa) * area * radial
    assert mass == pytest.approx(1.0, abs=1e-4)


def test_gaussian_sample_covariance():
    rng = np.random.default_rng(0)
    comp = EllipticalComponent(np.zeros(2), np.eye(2), "gaussian")
    x = comp.sample(100_000, rng)
    cov = np.cov(x.T)
    assert np.abs(cov - np.eye(2)).max() < 0.05


def test_gaussian_radius_matches_chi_square():
    rng = np.random.default_rng(1)
    comp = EllipticalComponent(np.zeros(3), np.eye(3), "gaussian")
    x = comp.sample(100_000, rng)
    t = np.sort((x ** 2).sum(axis=1))
    n = t.size
    cdf = chi2.cdf(t, df=3)
    ks = np.max(np.maximum(cdf - np.arange(n) / n, (np.arange(n) + 1) / n - cdf))
    assert ks < 0.01


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_directions_uniform_on_sphere(family):
    rng = np.random.default_rng(2)
    m, n = 3, 60_000
    comp = EllipticalComponent(np.zeros(m), np.eye(m), family)
    x = comp.sample(n, rng)
    u = x / np.linalg.norm(x, axis=1, keepdims=True)
    se_mean = 1.0 / math.sqrt(n * m)
    assert np.abs(u.mean(axis=0)).max() < 3 * se_mean * math.sqrt(m)
    outer = np.einsum("ni,nj->ij", u, u) / n
    se_outer = 1.0 / math.sqrt(n)
    assert np.abs(outer - np.eye(m) / m).max() < 3 * se_outer


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_sample_log_pdf_consistency(family):
    # mean log-density of one batch vs an independent batch, 3 combined SE
    rng = np.random.default_rng(3)
    comp = EllipticalComponent(np.array([1.0, -2.0]),
                               np.array([[2.0, 0.3], [0.3, 0.5]]), family)
    a = comp.log_pdf(comp.sample(100_000, rng))
    b = comp.log_pdf(comp.sample(100_000, rng))
    se = math.hypot(a.std(ddof=1) / math.sqrt(a.size),
                    b.std(ddof=1) / math.sqrt(b.size))
    assert abs(a.mean() - b.mean()) < 3 * se


def test_sampling_is_seed_deterministic():
    comp = EllipticalComponent(np.zeros(2), np.eye(2), "logistic")
    x1 = comp.sample(50, np.random.default_rng(7))
    x2 = comp.sample(50, np.random.default_rng(7))
    np.testing.assert_array_equal(x1, x2)
