"""Seedable generators for every dataset the evaluation protocol needs.

All generators are deterministic functions of their seed; ground-truth
parameters and labels are returned alongside the samples (noise rows are
labelled -1).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .elliptical import EllipticalComponent
from .generators import get_generator
from .mixture import Dataset, MixtureParams


@dataclass
class SyntheticSpec:
    """Controls for the random cluster generator.

    separation c: every pair of means satisfies
    ||mu_i - mu_j||^2 >= c * max(tr Sigma_i, tr Sigma_j); eccentricity e is
    the eigenvalue ratio of every scatter (exactly).
    """

    dim: int
    k: int
    n: int
    separation: float = 10.0
    eccentricity: float = 10.0
    families: list | str = "gaussian"
    weights: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.separation <= 0:
            raise ValueError("separation must be > 0")
        if self.eccentricity < 1:
            raise ValueError("eccentricity must be >= 1")
        if self.n < self.k:
            raise ValueError("need at least one sample per component")


#: initial side of the mean-placement cube, in units of the minimum
#: separation distance; placement stays feasible because the side grows
#: whenever rejection stalls
_PACKING_FACTOR = 1.25


def _random_orthogonal(dim, rng):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def make_synthetic(spec: SyntheticSpec):
    """Random well-separated mixture and a sample from it.

    Scatters are Q diag(s*e, s*r_2..s*r_{M-1}, s) Q^T with the middle
    eigenvalues log-uniform in [1, e] and the scale s log-uniform in
    [0.5, 2]; means are placed by rejection inside a cube whose side grows
    by x1.5 after every 1000 rejections, so placement always terminates.
    """
    rng = np.random.default_rng(spec.seed)
    m, k = spec.dim, spec.k
    e = spec.eccentricity
    scatters = []
    for _ in range(k):
        scale = np.exp(rng.uniform(np.log(0.5), np.log(2.0)))
        if m == 1:
            eig = np.array([scale])
        else:
            mid = np.exp(rng.uniform(0.0, np.log(e), size=max(m - 2, 0)))
            eig = scale * np.sort(np.concatenate([[e], mid, [1.0]]))[::-1]
        q = _random_orthogonal(m, rng)
        scatters.append((q * eig) @ q.T)
    bound = spec.separation * max(np.trace(s) for s in scatters)
    side = _PACKING_FACTOR * np.sqrt(bound)
    means, rejected = [], 0
    while len(means) < k:
        cand = rng.uniform(-side / 2, side / 2, size=m)
        ok = all((cand - mu) @ (cand - mu)
                 >= spec.separation * max(np.trace(scatters[i]), np.trace(scatters[len(means)]))
                 for i, mu in enumerate(means))
        if ok:
            means.append(cand)
        else:
            rejected += 1
            if rejected >= 1000:
                side *= 1.5
                rejected = 0
    weights = (np.full(k, 1.0 / k) if spec.weights is None
               else np.asarray(spec.weights, float))
    fams = [spec.families] * k if isinstance(spec.families, str) else spec.families
    truth = MixtureParams(weights, means, scatters, fams)
    x, labels = truth.sample(spec.n, rng)
    return Dataset(x), (truth, labels)


def make_flower(n: int, seed: int = 0):
    """Four equal clusters at (+-5, +-5), long axes pointing at the origin.

    Covariances are R(theta) diag(4, 0.25) R(theta)^T with theta = 45, -45,
    -45, 45 degrees for the means (5,5), (5,-5), (-5,5), (-5,-5).
    """
    if n < 4:
        raise ValueError("need at least 4 samples")
    rng = np.random.default_rng(seed)
    means = [np.array(v, float) for v in ((5, 5), (5, -5), (-5, 5), (-5, -5))]
    covs = []
    for theta in np.deg2rad([45.0, -45.0, -45.0, 45.0]):
        c, s = np.cos(theta), np.sin(theta)
        r = np.array([[c, -s], [s, c]])
        covs.append(r @ np.diag([4.0, 0.25]) @ r.T)
    truth = MixtureParams(np.full(4, 0.25), means, covs, "gaussian")
    x, labels = truth.sample(n, rng)
    return Dataset(x), (truth, labels)


def add_uniform_noise(data: Dataset, labels, fraction: float,
                      box=((-15.0, 15.0),), seed: int = 0):
    """Append floor(fraction * N) uniform rows over the box, labelled -1."""
    if fraction <= 0:
        raise ValueError("fraction must be > 0")
    rng = np.random.default_rng(seed)
    n_noise = int(fraction * data.n)
    if n_noise == 0:
        return data, labels
    box = np.asarray(box, float)
    if box.shape == (1, 2):
        box = np.repeat(box, data.dim, axis=0)
    noise = rng.uniform(box[:, 0], box[:, 1], size=(n_noise, data.dim))
    x = np.vstack([data.x, noise])
    labels = np.concatenate([labels, np.full(n_noise, -1, dtype=int)])
    return Dataset(x), labels


def replace_with_cauchy(data: Dataset, truth, labels, components, seed: int = 0):
    """Regenerate the chosen components' rows from Cauchy with the same (mu, Sigma)."""
    rng = np.random.default_rng(seed)
    x = data.x.copy()
    params, _ = truth if isinstance(truth, tuple) else (truth, None)
    for k in components:
        rows = np.flatnonzero(labels == k)
        comp = EllipticalComponent(params.means[k], params.scatters[k], "cauchy")
        x[rows] = comp.sample(len(rows), rng)
    new_fams = [("cauchy" if k in components else g.name)
                for k, g in enumerate(params.generators)]
    new_truth = MixtureParams(params.weights, params.means, params.scatters,
                              new_fams)
    return Dataset(x), (new_truth, labels)


def hennig_1d(n_per_cluster: int = 300, sigma: float = 1.0,
              centers=(0.0, -5.0, -10.0)):
    """Deterministic quantile clusters: x_i = mu_c + sigma * Phi^-1((i-1/2)/n)."""
    if n_per_cluster < 2:
        raise ValueError("need at least 2 points per cluster")
    probs = (np.arange(1, n_per_cluster + 1) - 0.5) / n_per_cluster
    base = sigma * ndtri(probs)
    x = np.concatenate([mu + base for mu in centers])[:, None]
    labels = np.repeat(np.arange(len(centers)), n_per_cluster)
    return Dataset(x), labels


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def write_csv(path_or_buf, data: Dataset, labels=None, header: bool = False):
    """One row per sample, numeric columns then an optional integer label."""
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        f = open(path_or_buf, "w", newline="")
        close = True
    else:
        f = path_or_buf
    try:
        w = csv.writer(f)
        if header:
            cols = [f"x{i}" for i in range(data.dim)]
            if labels is not None:
                cols.append("label")
            w.writerow(cols)
        for i in range(data.n):
            row = [format(v, ".17g") for v in data.x[i]]
            if labels is not None:
                row.append(int(labels[i]))
            w.writerow(row)
    finally:
        if close:
            f.close()


def read_csv(path, labelled: bool | None = None):
    """Read a sample matrix; auto-detects a header row and a label column."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    start = 0
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        start = 1
    raw = np.array([[float(v) for v in r] for r in rows[start:] if r])
    if labelled is None:
        col = raw[:, -1]
        labelled = raw.shape[1] > 1 and np.allclose(col, np.round(col)) \
            and col.min() >= -1 and col.max() < 4096
    if labelled:
        return Dataset(raw[:, :-1]), raw[:, -1].astype(int)
    return Dataset(raw), None
