"""SPD-manifold primitives and the product manifold used by the solvers.

The scatter blocks live on the SPD cone with the affine-invariant metric
``<xi, eta>_Sigma = tr(Sigma^-1 xi Sigma^-1 eta)`` (the conventional 1/2 is
dropped uniformly; only directions matter to the conjugate-gradient solver
and the line search absorbs scale).  Mixing weights travel as unconstrained
logits and positive scalars in the log domain, both with the Euclidean
metric, addition as retraction and identity transport.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, linalg

from .generators import DensityGenerator


class RetractionError(FloatingPointError):
    """Step left the SPD cone; the caller should shorten it and retry."""


def sym(a):
    """Symmetric part (G + G^T)/2."""
    return 0.5 * (a + a.T)


def _solve_spd(sigma, b, chol=None):
    if chol is None:
        chol = linalg.cholesky(sigma, lower=True)
    return linalg.cho_solve((chol, True), b)


def spd_inner(sigma, xi, eta, chol=None):
    """tr(Sigma^-1 xi Sigma^-1 eta); symmetric in (xi, eta)."""
    sx = _solve_spd(sigma, xi, chol)
    se = _solve_spd(sigma, eta, chol)
    return float(np.tensordot(sx, se.T))


def spd_egrad_to_rgrad(sigma, egrad):
    """Riemannian gradient Sigma sym(egrad) Sigma for the metric above."""
    return sigma @ sym(egrad) @ sigma


def spd_retract(sigma, xi, chol=None):
    """Second-order retraction Sigma + xi + xi Sigma^-1 xi / 2.

    Raises RetractionError when the result is not positive definite, which
    the line search treats as a too-long step.
    """
    cand = sym(sigma + xi + 0.5 * (xi @ _solve_spd(sigma, xi, chol)))
    if not np.all(np.isfinite(cand)):
        raise RetractionError("retraction produced non-finite entries")
    try:
        c = linalg.cholesky(cand, lower=True)
    except (linalg.LinAlgError, ValueError):
        raise RetractionError("retraction left the SPD cone") from None
    if not np.all(np.isfinite(c)):
        raise RetractionError("retraction produced non-finite entries")
    return cand


def spd_transport(sigma1, sigma2, xi):
    """Parallel transport E xi E^T with E = (Sigma2 Sigma1^-1)^{1/2}.

    E is the principal square root, computed through the SPD congruence
    Sigma1^{1/2} (Sigma1^{-1/2} Sigma2 Sigma1^{-1/2})^{1/2} Sigma1^{-1/2};
    the map is an exact isometry between the two tangent spaces.  Falls back
    to the identity map when either endpoint is numerically degenerate (the
    solvers treat that as "good enough to keep going").
    """
    try:
        w1, v1 = np.linalg.eigh(sigma1)
        if w1[0] <= 0 or not np.all(np.isfinite(w1)):
            return xi
        r1 = (v1 * np.sqrt(w1)) @ v1.T
        r1i = (v1 / np.sqrt(w1)) @ v1.T
        inner = sym(r1i @ sigma2 @ r1i)
        w2, v2 = np.linalg.eigh(inner)
        e = r1 @ (v2 * np.sqrt(np.maximum(w2, 0.0))) @ v2.T @ r1i
        out = sym(e @ xi @ e.T)
    except np.linalg.LinAlgError:
        return xi
    return out if np.all(np.isfinite(out)) else xi


def spd_exp(sigma, xi):
    """Exact exponential map (test oracle, not used by the solvers)."""
    w, v = np.linalg.eigh(sigma)
    r = (v * np.sqrt(w)) @ v.T
    ri = (v / np.sqrt(w)) @ v.T
    return sym(r @ linalg.expm(sym(ri @ xi @ ri)) @ r)


def spd_distance(a, b):
    """Affine-invariant geodesic distance ||log(A^-1/2 B A^-1/2)||_F."""
    w, v = np.linalg.eigh(a)
    ri = (v / np.sqrt(w)) @ v.T
    ev = np.linalg.eigvalsh(sym(ri @ b @ ri))
    return float(np.linalg.norm(np.log(ev)))


def reformulate_blocks(mu, sigma, lam):
    """Augmented (M+1)x(M+1) SPD matrix [[Sigma + lam mu mu^T, lam mu], [lam mu^T, lam]]."""
    mu = np.asarray(mu, float).reshape(-1)
    m = mu.size
    out = np.empty((m + 1, m + 1))
    out[:m, :m] = sigma + lam * np.outer(mu, mu)
    out[:m, m] = lam * mu
    out[m, :m] = lam * mu
    out[m, m] = lam
    return out


def reformulation_metric_residual(mu, sigma, lam, dmu, dsigma, dlam):
    """Residual of the metric identity tying the augmented cone to (mu, Sigma, lam).

    Builds the first-order perturbation dS of the augmented matrix from
    (dmu, dSigma, dlam) and returns

        | 1/2 tr(dS S^-1 dS S^-1)
          - [lam dmu^T Sigma^-1 dmu + 1/2 tr(dSigma Sigma^-1 dSigma Sigma^-1)
             + 1/2 (dlam/lam)^2] |

    The identity is exact, so the residual is at rounding level for any
    perturbation size.  (The 1/2 on the augmented side is required: both
    sides are quadratic forms and the trace form alone is twice the right
    side, as the scalar case dmu=dSigma=0 already shows.)
    """
    mu = np.asarray(mu, float).reshape(-1)
    dmu = np.asarray(dmu, float).reshape(-1)
    m = mu.size
    big = reformulate_blocks(mu, sigma, lam)
    dbig = np.empty((m + 1, m + 1))
    dbig[:m, :m] = dsigma + dlam * np.outer(mu, mu) \
        + lam * (np.outer(dmu, mu) + np.outer(mu, dmu))
    dbig[:m, m] = dlam * mu + lam * dmu
    dbig[m, :m] = dbig[:m, m]
    dbig[m, m] = dlam
    lhs = 0.5 * spd_inner(big, dbig, dbig)
    sigi_dmu = _solve_spd(np.asarray(sigma, float), dmu)
    rhs = (lam * float(dmu @ sigi_dmu)
           + 0.5 * spd_inner(np.asarray(sigma, float), dsigma, dsigma)
           + 0.5 * (dlam / lam) ** 2)
    return abs(lhs - rhs)


def mean_metric_coefficient(generator: DensityGenerator, dim: int) -> float:
    """Coefficient (4/M) E[t psi(t)^2] of the location metric dmu^T Sigma^-1 dmu.

    The expectation runs over the normalized radial law of the squared
    radius.  Divergent integrals (families whose psi pole at zero is too
    strong for the dimension) are reported as +inf with a warning.
    """
    dim = int(dim)
    total = generator.radial_integral(dim)

    def f(u):
        return (generator.radial_integrand(u, dim)
                * u * np.asarray(generator._psi(np.asarray(u, float), dim)) ** 2)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            head = integrate.quad(f, 0.0, 1.0, epsabs=1e-12, epsrel=1e-10, limit=400)[0]
            tail = integrate.quad(f, 1.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=400)[0]
        except (integrate.IntegrationWarning, ArithmeticError):
            warnings.warn(
                f"{generator.name}: location-metric integral diverges for M={dim}",
                RuntimeWarning, stacklevel=2)
            return math.inf
    val = 4.0 / dim * (head + tail) / total
    if not np.isfinite(val):
        warnings.warn(
            f"{generator.name}: location-metric integral diverges for M={dim}",
            RuntimeWarning, stacklevel=2)
        return math.inf
    return val


# ---------------------------------------------------------------------------
# product manifold
# ---------------------------------------------------------------------------

@dataclass
class ProductPoint:
    """A point of the solver's search space.

    spd_blocks : list of SPD matrices (one per mixture component)
    logits     : mixing weights as unconstrained logits (softmax gives pi)
    log_scalars: optional log of the per-component positive scalars
    means      : optional list of Euclidean location vectors
    """

    spd_blocks: list
    logits: np.ndarray
    log_scalars: np.ndarray | None = None
    means: list | None = None
    chols: list | None = None  # per-block Cholesky factors, filled lazily

    @property
    def weights(self):
        e = np.exp(self.logits - self.logits.max())
        return e / e.sum()

    @property
    def scalars(self):
        return None if self.log_scalars is None else np.exp(self.log_scalars)

    def chol(self, k):
        if self.chols is None:
            self.chols = [None] * len(self.spd_blocks)
        if self.chols[k] is None:
            self.chols[k] = linalg.cholesky(self.spd_blocks[k], lower=True)
        return self.chols[k]


@dataclass
class ProductTangent:
    """Tangent vector with the same block structure as ProductPoint."""

    spd_parts: list
    logits: np.ndarray
    log_scalars: np.ndarray | None = None
    means: list | None = None

    def scaled(self, a: float) -> "ProductTangent":
        return ProductTangent(
            [a * s for s in self.spd_parts], a * self.logits,
            None if self.log_scalars is None else a * self.log_scalars,
            None if self.means is None else [a * m for m in self.means])

    def plus(self, other: "ProductTangent", a: float = 1.0) -> "ProductTangent":
        return ProductTangent(
            [s + a * o for s, o in zip(self.spd_parts, other.spd_parts)],
            self.logits + a * other.logits,
            None if self.log_scalars is None
            else self.log_scalars + a * other.log_scalars,
            None if self.means is None
            else [m + a * o for m, o in zip(self.means, other.means)])


def product_zero_like(point: ProductPoint) -> ProductTangent:
    return ProductTangent(
        [np.zeros_like(b) for b in point.spd_blocks],
        np.zeros_like(point.logits),
        None if point.log_scalars is None else np.zeros_like(point.log_scalars),
        None if point.means is None else [np.zeros_like(m) for m in point.means])


def product_inner(point: ProductPoint, u: ProductTangent, v: ProductTangent) -> float:
    out = 0.0
    for k, b in enumerate(point.spd_blocks):
        out += spd_inner(b, u.spd_parts[k], v.spd_parts[k], chol=point.chol(k))
    out += float(u.logits @ v.logits)
    if point.log_scalars is not None:
        out += float(u.log_scalars @ v.log_scalars)
    if point.means is not None:
        out += sum(float(a @ b) for a, b in zip(u.means, v.means))
    return out


def product_norm(point: ProductPoint, u: ProductTangent) -> float:
    return math.sqrt(max(product_inner(point, u, u), 0.0))


def product_retract(point: ProductPoint, step: ProductTangent) -> ProductPoint:
    """Block-wise retraction; propagates RetractionError from any SPD block."""
    blocks = [spd_retract(b, step.spd_parts[k], chol=point.chol(k))
              for k, b in enumerate(point.spd_blocks)]
    logits = point.logits + step.logits
    logits = logits - logits.mean()  # softmax gauge fixing, keeps logits bounded
    return ProductPoint(
        blocks, logits,
        None if point.log_scalars is None else point.log_scalars + step.log_scalars,
        None if point.means is None
        else [m + s for m, s in zip(point.means, step.means)])


def product_transport(old: ProductPoint, new: ProductPoint,
                      u: ProductTangent) -> ProductTangent:
    return ProductTangent(
        [spd_transport(ob, nb, p) for ob, nb, p
         in zip(old.spd_blocks, new.spd_blocks, u.spd_parts)],
        u.logits.copy(),
        None if u.log_scalars is None else u.log_scalars.copy(),
        None if u.means is None else [m.copy() for m in u.means])
