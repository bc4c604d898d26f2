"""Numeric self-checks shared by the `check` command and the test suite.

Each check returns (name, passed, detail); ``run_all`` prints one line per
check.  The finite-difference machinery here is the independent oracle the
analytic gradients are validated against.
"""

from __future__ import annotations

import math

import numpy as np

from .generators import FAMILY_NAMES, get_generator
from .geometry import (mean_metric_coefficient, reformulation_metric_residual,
                       spd_retract)
from .mixture import (Dataset, MixtureParams, ReformulatedParams, nll,
                      original_gradients, reformulate, reformulated_cost,
                      reformulated_gradients)
from .robustness import sphere_moment_checks

import scipy.linalg as sla


def _rand_spd(dim, rng, scale=1.0):
    a = rng.standard_normal((dim, dim))
    return scale * (a @ a.T + dim * np.eye(dim))


def _rand_instance(family, rng, m=None, k=None, n=40):
    m = m or int(rng.integers(2, 4))
    k = k or int(rng.integers(1, 3))
    x = rng.standard_normal((n, m)) * rng.uniform(0.8, 1.6)
    mus = [rng.standard_normal(m) for _ in range(k)]
    sigs = [_rand_spd(m, rng) for _ in range(k)]
    w = rng.dirichlet(np.ones(k) * 5.0)
    return Dataset(x), MixtureParams(w, mus, sigs, [family] * k)


def _softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def _central_diff(cost, eps):
    """Two-level Richardson central difference (eps^2 and eps^4 terms removed)."""
    d1 = (cost(eps) - cost(-eps)) / (2.0 * eps)
    d2 = (cost(0.5 * eps) - cost(-0.5 * eps)) / eps
    d3 = (cost(0.25 * eps) - cost(-0.25 * eps)) / (0.5 * eps)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def reformulated_gradient_fd_error(family, rng, eps=1e-5):
    """Relative error between the analytic directional derivative of the
    augmented cost and a central finite difference along a random tangent."""
    data, orig = _rand_instance(family, rng)
    k, m = orig.k, orig.dim
    lams = rng.uniform(0.4, 2.5, k)
    blocks = [reformulate(orig.means[i], orig.scatters[i], lams[i])
              for i in range(k)]
    params = ReformulatedParams(orig.weights, blocks, 1.0 / lams, [family] * k)
    gb, gl, gc = reformulated_gradients(params, data)
    xi_b = [0.5 * (lambda a: a + a.T)(rng.standard_normal((m + 1, m + 1)))
            for _ in range(k)]
    xi_l = rng.standard_normal(k)
    xi_c = rng.standard_normal(k)
    logits0 = np.log(orig.weights)

    def cost(s):
        bl = [spd_retract(blocks[i], s * xi_b[i]) for i in range(k)]
        return reformulated_cost(ReformulatedParams(
            _softmax(logits0 + s * xi_l), bl,
            np.exp(np.log(params.scales) + s * xi_c), [family] * k), data)

    fd = _central_diff(cost, eps)
    an = sum(np.tensordot(sla.solve(blocks[i], gb[i]),
                          sla.solve(blocks[i], xi_b[i]).T)
             for i in range(k)) + gl @ xi_l + gc @ xi_c
    return abs(fd - an) / max(abs(fd), 1e-12)


def original_gradient_fd_error(family, rng, eps=1e-5):
    """Same oracle for the plain cost over (means, scatters, logits)."""
    data, orig = _rand_instance(family, rng)
    k, m = orig.k, orig.dim
    gm, gs, gl = original_gradients(orig, data)
    xi_m = [rng.standard_normal(m) for _ in range(k)]
    xi_s = [0.5 * (lambda a: a + a.T)(rng.standard_normal((m, m)))
            for _ in range(k)]
    xi_l = rng.standard_normal(k)
    logits0 = np.log(orig.weights)

    def cost(s):
        return nll(MixtureParams(
            _softmax(logits0 + s * xi_l),
            [orig.means[i] + s * xi_m[i] for i in range(k)],
            [spd_retract(orig.scatters[i], s * xi_s[i]) for i in range(k)],
            [family] * k), data)

    fd = _central_diff(cost, eps)
    an = sum(gm[i] @ xi_m[i] for i in range(k))
    an += sum(np.tensordot(sla.solve(orig.scatters[i], gs[i]),
                           sla.solve(orig.scatters[i], xi_s[i]).T)
              for i in range(k))
    an += gl @ xi_l
    return abs(fd - an) / max(abs(fd), 1e-12)


def metric_identity_residuals(rng, count=100, magnitude=1e-4):
    """Residuals of the augmented-metric identity on random perturbations."""
    out = []
    for _ in range(count):
        m = int(rng.integers(1, 5))
        mu = rng.standard_normal(m)
        sig = _rand_spd(m, rng)
        lam = float(rng.uniform(0.2, 5.0))
        dmu = rng.standard_normal(m) * magnitude
        dsig = rng.standard_normal((m, m)) * magnitude
        dsig = 0.5 * (dsig + dsig.T)
        dlam = float(rng.standard_normal()) * magnitude
        out.append(reformulation_metric_residual(mu, sig, lam, dmu, dsig, dlam))
    return np.array(out)


def normalizer_crosschecks(rng, n_mc=200_000):
    """Quadrature normalizers vs closed forms and a Monte Carlo estimate.

    The Monte Carlo oracle draws the squared radius U from the Cauchy radial
    law (sampled as |Z|^2/W^2 with Gaussian Z, W, which has the closed-form
    density u^{M/2-1}(1+u)^{-(M+1)/2}/B(M/2,1/2)) and averages the importance
    ratio ghat(U) (1+U)^{(M+1)/2}, giving I(M)/B(M/2,1/2).
    """
    from scipy.special import betaln

    results = {}
    for m in (1, 2, 3):
        gauss = get_generator("gaussian")
        lhs = (math.lgamma(0.5 * m) - 0.5 * m * math.log(math.pi)
               - math.log(gauss.radial_integral(m)))
        results[f"gaussian_closed_m{m}"] = abs(lhs - gauss.log_normalizer(m))
        cauchy = get_generator("cauchy")
        lhs = (math.lgamma(0.5 * m) - 0.5 * m * math.log(math.pi)
               - math.log(cauchy.radial_integral(m)))
        results[f"cauchy_closed_m{m}"] = abs(lhs - cauchy.log_normalizer(m))
    for family in FAMILY_NAMES:
        gen = get_generator(family)
        m = 2
        z = rng.standard_normal((n_mc, m))
        w = rng.standard_normal(n_mc)
        u = (z ** 2).sum(axis=1) / w ** 2
        log_b = betaln(0.5 * m, 0.5)
        ratio = np.exp(gen._log_g(np.maximum(u, 1e-300), m)
                       + 0.5 * (m + 1) * np.log1p(u))
        est = math.exp(log_b) * ratio.mean()
        se = math.exp(log_b) * ratio.std(ddof=1) / math.sqrt(n_mc)
        diff = abs(est - gen.radial_integral(m))
        # the cauchy ratio is identically 1, so its spread is exactly zero
        z = 0.0 if diff <= 1e-9 * gen.radial_integral(m) else diff / max(se, 1e-300)
        results[f"{family}_mc_z_m{m}"] = z
    return results


def run_all(verbose=False, seed=0):
    rng = np.random.default_rng(seed)
    checks = []

    worst = max(max(reformulated_gradient_fd_error(f, rng),
                    original_gradient_fd_error(f, rng))
                for f in FAMILY_NAMES for _ in range(2))
    checks.append(("gradient finite differences", worst < 1e-5,
                   f"worst rel err {worst:.2e}"))

    res = metric_identity_residuals(rng, count=50)
    checks.append(("augmented metric identity", float(res.max()) < 1e-8,
                   f"max residual {res.max():.2e}"))

    zmax = 0.0
    for m in (2, 3):
        r = sphere_moment_checks(m, 100_000, rng)
        zmax = max(zmax, r["second_moment"]["max_z"],
                   r["quadratic_form"]["max_z"], r["fourth_moment"]["max_z"])
    checks.append(("sphere moment identities", zmax < 5.0,
                   f"max |z| {zmax:.2f}"))

    nc = normalizer_crosschecks(rng)
    closed = max(v for k, v in nc.items() if "closed" in k)
    mc = max(v for k, v in nc.items() if "_mc_" in k)
    checks.append(("normalizers vs closed forms", closed < 1e-8,
                   f"max abs err {closed:.2e}"))
    checks.append(("normalizers vs Monte Carlo", mc < 3.0,
                   f"max |z| {mc:.2f}"))

    coef = [abs(mean_metric_coefficient(get_generator("gaussian"), m) - 1.0)
            for m in (1, 2, 8)]
    checks.append(("gaussian location metric = 1", max(coef) < 1e-6,
                   f"max err {max(coef):.2e}"))

    ok = True
    for name, passed, detail in checks:
        ok &= passed
        if verbose:
            print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return ok
