"""Influence functions of the mixture estimators.

The theoretical influence function of an infinitesimal point-mass
contamination at ``x0`` on the fitted scatter of component ``j`` is, in
whitened coordinates z0 = Sigma_j^{-1/2}(x0 - mu_j), t0 = |z0|^2:

    IF(z0) = [ (2 w1 xi psi(t0) t0 + w2 xi) / (2 (M w1 - w2) w2) ] I
             - (xi psi(t0) / w2) z0 z0^T

mapped back by the affine rule Sigma^{1/2} IF Sigma^{1/2}; the mean IF is
xi_j(x0) psi_j(t0) (x0 - mu_j) / w3.  The constants w1, w2, w3 are
expectations of responsibility/psi moments over the data distribution and
do not depend on the outlier.  The empirical counterpart refits the model
on a reweighted sample that realizes the contaminated measure
(1-eps) F_N + eps delta_{x0} and differences the estimates.

For the lone-Gaussian reduction (xi = 1, psi = -1/2, psi' = 0) the
constants are w1 = 0, w2 = 1/2, w3 = -1/2 and the formulas collapse to the
classical (x0-mu)(x0-mu)^T - Sigma and x0 - mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import hennig_1d
from .mixture import Dataset, MixtureParams, _eval_original
from .solvers import FitOptions, fit_our, initialize


class DegenerateConstantsError(ArithmeticError):
    """w2 or w3 vanished; the influence function is undefined."""


def _sym_sqrt(mat):
    w, v = np.linalg.eigh(mat)
    return (v * np.sqrt(w)) @ v.T, (v / np.sqrt(w)) @ v.T


def _component_stats(model: MixtureParams, j: int, data: Dataset):
    """(xi_j, t_j, psi, psi') per data row, all for component j."""
    ev = _eval_original(model, data)
    xi = ev.xi[:, j]
    t = np.maximum(ev.t[:, j], 1e-12)
    g = model.generators[j]
    return xi, t, g._psi(t, data.dim), g._psi_prime(t, data.dim)


def if_constants(model: MixtureParams, j: int, data: Dataset,
                 sample_from_model: int = 0, rng=None):
    """Outlier-independent constants (w1, w2, w3) of the influence functions.

    Expectations are sample averages over ``data`` (the empirical measure the
    estimator actually saw).  Pass ``sample_from_model=n`` to average over a
    fresh model sample instead.
    """
    if sample_from_model:
        x, _ = model.sample(sample_from_model, np.random.default_rng(rng))
        data = Dataset(x)
    m = data.dim
    xi, t, psi, dpsi = _component_stats(model, j, data)
    w = data.row_weights()
    w = w / w.sum()

    def avg(values):
        return float(w @ values)

    xi2 = xi - xi ** 2
    quad = avg(xi2 * psi ** 2 * t ** 2) + avg(xi * dpsi * t ** 2)
    w1 = quad / (m * (m + 1)) + avg(xi2 * psi * t) / m + avg(xi2) / 4.0
    w2 = model.weights[j] / 2.0 - quad / (m * (m + 1))
    w3 = (2.0 * avg(xi * dpsi * t) / m + avg(xi * psi)
          + 2.0 * avg(xi2 * psi ** 2 * t) / m)
    if abs(w2) < 1e-10 or abs(w3) < 1e-10:
        raise DegenerateConstantsError(
            f"degenerate influence constants w2={w2!r}, w3={w3!r}")
    return w1, w2, w3


def theoretical_if(model: MixtureParams, j: int, x0, data: Dataset = None,
                   constants=None):
    """(IF_mean, IF_cov) of component j at outlier location x0."""
    if constants is None:
        if data is None:
            raise ValueError("need either data or precomputed constants")
        constants = if_constants(model, j, data)
    w1, w2, w3 = constants
    x0 = np.asarray(x0, float).reshape(-1)
    m = x0.size
    root, root_inv = _sym_sqrt(model.scatters[j])
    z0 = root_inv @ (x0 - model.means[j])
    t0 = max(float(z0 @ z0), 1e-12)
    ev = _eval_original(model, Dataset(x0[None, :]))
    xi0 = float(ev.xi[0, j])
    psi0 = float(model.generators[j]._psi(np.asarray(t0), m))
    scalar = (2.0 * w1 * xi0 * psi0 * t0 + w2 * xi0) / (2.0 * (m * w1 - w2) * w2)
    if_id = scalar * np.eye(m) - (xi0 * psi0 / w2) * np.outer(z0, z0)
    if_cov = root @ if_id @ root
    if_mean = xi0 * psi0 * (x0 - model.means[j]) / w3
    return if_mean, 0.5 * (if_cov + if_cov.T)


def empirical_if(data: Dataset, x0, eps: float, j: int,
                 base: MixtureParams, opts: FitOptions | None = None):
    """Contaminated-refit influence estimate ((theta_eps - theta)/eps).

    The refit sees the original rows at weight (1-eps) and the outlier row at
    weight eps*N, i.e. the empirical contaminated measure; it is warm-started
    at the uncontaminated optimum and the perturbed component is matched back
    by nearest mean.
    """
    if not 0 < eps <= 0.1:
        raise ValueError("eps must be in (0, 0.1]")
    x0 = np.asarray(x0, float).reshape(-1)
    contaminated = Dataset(
        np.vstack([data.x, x0[None, :]]),
        np.concatenate([data.row_weights() * (1.0 - eps), [eps * data.n]]))
    report = fit_our(base, contaminated, opts or FitOptions())
    if report.failed:
        raise RuntimeError(
            f"contaminated refit failed: {report.failure_reason}")
    fitted = report.params
    dists = [np.linalg.norm(mu - base.means[j]) for mu in fitted.means]
    jj = int(np.argmin(dists))
    if_mean = (fitted.means[jj] - base.means[j]) / eps
    if_cov = (fitted.scatters[jj] - base.scatters[j]) / eps
    return if_mean, if_cov


def richardson(values, steps):
    """Limit of a sequence D(eps) = L + a eps + b eps^2 + ... at eps -> 0.

    ``values`` may be scalars or arrays, one per step; steps must decrease.
    """
    vals = [np.asarray(v, float) for v in values]
    h = [float(s) for s in steps]
    n = len(vals)
    for order in range(1, n):
        nxt = []
        for i in range(n - order):
            r = h[i] / h[i + order]
            nxt.append((r * vals[i + 1] - vals[i]) / (r - 1.0))
        vals = nxt
    return vals[0]


@dataclass
class InfluenceResult:
    """Theoretical and empirical IF values for one component over a grid."""

    grid: np.ndarray
    if_mean_theory: np.ndarray
    if_cov_theory: np.ndarray
    if_mean_empirical: np.ndarray
    if_cov_empirical: np.ndarray
    constants: tuple
    component: int
    model: MixtureParams

    def to_csv(self, path_or_buf):
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            f = open(path_or_buf, "w")
            close = True
        else:
            f = path_or_buf
        m = self.model.dim
        triu = [(a, b) for a in range(m) for b in range(a, m)]
        try:
            cols = ["x0"]
            for tag in ("mean_theory", "mean_empirical"):
                cols += [f"if_{tag}" + (f"_{i}" if m > 1 else "")
                         for i in range(m)]
            for tag in ("cov_theory", "cov_empirical"):
                cols += [f"if_{tag}" + (f"_{a}{b}" if m > 1 else "")
                         for a, b in triu]
            f.write(",".join(cols) + "\n")
            for i, x in enumerate(np.atleast_2d(self.grid.T).T):
                row = [format(v, ".17g") for v in np.atleast_1d(x)]
                row += [format(v, ".17g") for v in self.if_mean_theory[i]]
                row += [format(v, ".17g") for v in self.if_mean_empirical[i]]
                row += [format(self.if_cov_theory[i][a, b], ".17g")
                        for a, b in triu]
                row += [format(self.if_cov_empirical[i][a, b], ".17g")
                        for a, b in triu]
                f.write(",".join(row) + "\n")
        finally:
            if close:
                f.close()


def if_curve(family: str, grid, eps: float = 5e-3, n_per_cluster: int = 300,
             sigma: float = 1.0, opts: FitOptions | None = None,
             seed: int = 0, with_empirical: bool = True) -> InfluenceResult:
    """Fig-2-style curves on the deterministic three-cluster 1-D sample.

    Fits a K=3 mixture of the given family, picks the component nearest 0,
    and evaluates theoretical (and optionally refit-based) influence values
    for its mean and scatter over the outlier grid.
    """
    grid = np.asarray(grid, float).reshape(-1)
    data, _ = hennig_1d(n_per_cluster, sigma)
    opts = opts or FitOptions()
    init = initialize(data, 3, [family] * 3, scheme="kmeans_pp",
                      rng=np.random.default_rng(seed))
    report = fit_our(init, data, opts)
    if report.failed:
        raise RuntimeError(f"base fit failed: {report.failure_reason}")
    model = report.params
    j = int(np.argmin([abs(mu[0]) for mu in model.means]))
    constants = if_constants(model, j, data)
    n = grid.size
    mt = np.empty((n, 1))
    ct = np.empty((n, 1, 1))
    me = np.full((n, 1), np.nan)
    ce = np.full((n, 1, 1), np.nan)
    for i, x in enumerate(grid):
        m_i, c_i = theoretical_if(model, j, [x], constants=constants)
        mt[i], ct[i] = m_i, c_i
        if with_empirical:
            m_e, c_e = empirical_if(data, [x], eps, j, model, opts)
            me[i], ce[i] = m_e, c_e
    return InfluenceResult(grid, mt, ct, me, ce, constants, j, model)


def classify_boundedness(grid, values, ref_abscissa: float = 5.0,
                         factor: float = 1.5) -> bool:
    """True when the curve stays bounded as the outlier leaves the data.

    Compares the norm at the grid edges with the norm at +-ref_abscissa; an
    edge value within ``factor`` of the reference means the curve has
    plateaued (bounded influence), otherwise it is still growing.
    """
    grid = np.asarray(grid, float).reshape(-1)
    norms = np.array([np.linalg.norm(np.atleast_1d(v)) for v in values])
    edge = max(norms[np.argmin(grid)], norms[np.argmax(grid)])
    ref = max(norms[np.argmin(np.abs(grid - ref_abscissa))],
              norms[np.argmin(np.abs(grid + ref_abscissa))])
    return edge <= factor * ref


def sphere_moment_checks(m: int, n: int, rng, a=None):
    """Monte Carlo z-scores of the three uniform-direction moment identities.

    E[u u^T] = I/M,  E[u^T A u] = tr(A)/M,
    E[(u^T A u) u u^T] = (2A + tr(A) I) / (M (M+2))  for symmetric A.

    Returns per-identity dicts with the observed average, the exact value and
    the largest elementwise |z|.
    """
    if n < 10_000:
        raise ValueError("need at least 1e4 samples")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    u = rng.standard_normal((int(n), m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if a is None:
        a = rng.standard_normal((m, m))
        a = 0.5 * (a + a.T)
    a = np.asarray(a, float)

    def zscore(samples, exact):
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
        return mean, float(np.max(np.abs(mean - exact) / np.maximum(se, 1e-300)))

    outer = u[:, :, None] * u[:, None, :]
    mean1, z1 = zscore(outer, np.eye(m) / m)
    quad = np.einsum("ni,ij,nj->n", u, a, u)
    mean2, z2 = zscore(quad[:, None], np.array([np.trace(a) / m]))
    mean3, z3 = zscore(quad[:, None, None] * outer,
                       (2.0 * a + np.trace(a) * np.eye(m)) / (m * (m + 2)))
    return {
        "second_moment": {"observed": mean1, "exact": np.eye(m) / m, "max_z": z1},
        "quadratic_form": {"observed": float(mean2[0]),
                           "exact": float(np.trace(a) / m), "max_z": z2},
        "fourth_moment": {"observed": mean3,
                          "exact": (2.0 * a + np.trace(a) * np.eye(m))
                          / (m * (m + 2)), "max_z": z3},
        "matrix": a,
    }
