"""Single elliptical components: density evaluation and sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .generators import DensityGenerator, get_generator

#: scatter matrices with eigenvalue ratio beyond this are treated as singular
SINGULARITY_RATIO = 1e12


class SingularScatterError(np.linalg.LinAlgError):
    """Scatter matrix is numerically singular or not positive definite."""


def _chol_spd(sigma, what="scatter"):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    if not np.allclose(sigma, sigma.T, atol=1e-10 * max(1.0, np.abs(sigma).max())):
        raise ValueError(f"{what} must be symmetric")
    try:
        chol = linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularScatterError(f"{what} is not positive definite") from exc
    d = np.diag(chol)
    if d.min() ** 2 < d.max() ** 2 / SINGULARITY_RATIO:
        raise SingularScatterError(
            f"{what} is numerically singular (condition beyond {SINGULARITY_RATIO:g})")
    return chol


@dataclass
class EllipticalComponent:
    """One elliptical distribution: mean, SPD scatter, and a radial family."""

    mean: np.ndarray
    scatter: np.ndarray
    generator: DensityGenerator

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.scatter = np.asarray(self.scatter, dtype=float)
        if isinstance(self.generator, str):
            self.generator = get_generator(self.generator)
        if self.scatter.shape != (self.dim, self.dim):
            raise ValueError("scatter shape does not match the mean")
        self._chol = _chol_spd(self.scatter)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of the scatter (cached)."""
        return self._chol

    def mahalanobis(self, x):
        """t = (x-mu)^T Sigma^{-1} (x-mu) for one point or a stack of rows."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = linalg.solve_triangular(self._chol, (x - self.mean).T, lower=True)
        t = np.einsum("dn,dn->n", z, z)
        return t if t.size > 1 else float(t[0])

    def log_pdf(self, x):
        """log density at x (vectorized over rows)."""
        t = np.atleast_1d(self.mahalanobis(x))
        out = (self.generator.log_normalizer(self.dim)
               - np.log(np.diag(self._chol)).sum()
               + self.generator.log_g(t, self.dim))
        return out if out.size > 1 else float(out[0])

    def sample(self, n, rng):
        """Draw n rows via x = mu + R * Lambda * u.

        Lambda is the symmetric square root of the scatter, u is uniform on
        the unit sphere and R^2 follows the family's radial law.
        """
        n = int(n)
        if n < 1:
            raise ValueError("n must be >= 1")
        u = rng.standard_normal((n, self.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = np.sqrt(self.generator.radial_sampler(self.dim, n, rng))
        w, v = np.linalg.eigh(self.scatter)
        root = (v * np.sqrt(w)) @ v.T
        return self.mean + (r[:, None] * u) @ root
