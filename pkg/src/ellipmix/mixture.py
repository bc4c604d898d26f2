"""Mixture parameterizations, costs, responsibilities and analytic gradients.

Two equivalent parameterizations are used throughout:

* ``MixtureParams`` -- weights pi_k, means mu_k, scatters Sigma_k, one radial
  family per component; the negative log-likelihood is ``nll``.
* ``ReformulatedParams`` -- weights pi_k, augmented (M+1)x(M+1) SPD blocks
  S_k that absorb the mean through ``reformulate``, positive compensation
  scalars c_k; the cost is ``reformulated_cost`` evaluated on the augmented
  rows y = [x, 1].

For any (mu, Sigma, lam > 0), ``reformulated_cost`` at S = reformulate(mu,
Sigma, lam) with c = 1/lam equals ``nll`` at (mu, Sigma) exactly: the
augmented quadratic form is t + 1/lam and det S = lam det Sigma, so the
compensation cancels the reformulation identically, not only at optima.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .elliptical import EllipticalComponent, SingularScatterError, _chol_spd
from .generators import T_CLAMP, DensityGenerator, get_generator
from .geometry import reformulate_blocks, sym

#: floor for psi/psi' arguments inside gradient weights; keeps the first
#: iteration finite when an initial mean sits exactly on a data row (the
#: cusp families have psi -> +-inf there).  Cost evaluations are not floored.
PSI_ARG_FLOOR = 1e-8


class DecompositionError(ValueError):
    """Augmented block does not decompose into a valid (mu, Sigma, lam)."""


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """Sample matrix with cached augmentation and optional per-row weights."""

    x: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.ascontiguousarray(np.atleast_2d(np.asarray(self.x, float)))
        if not np.all(np.isfinite(self.x)):
            raise ValueError("data contains non-finite entries")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, float).reshape(-1)
            if self.weights.shape[0] != self.x.shape[0]:
                raise ValueError("weights length does not match data")
            if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
                raise ValueError("weights must be finite and >= 0")
        self._y = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def y(self) -> np.ndarray:
        """Rows augmented with a trailing 1."""
        if self._y is None:
            self._y = np.hstack([self.x, np.ones((self.n, 1))])
        return self._y

    @property
    def total_weight(self) -> float:
        return float(self.n) if self.weights is None else float(self.weights.sum())

    def row_weights(self) -> np.ndarray:
        return np.ones(self.n) if self.weights is None else self.weights


def _as_generators(gens, k):
    if isinstance(gens, (str, DensityGenerator)):
        gens = [gens] * k
    gens = [get_generator(g) if isinstance(g, str) else g for g in gens]
    if len(gens) != k:
        raise ValueError("need one family or one per component")
    return list(gens)


@dataclass
class MixtureParams:
    """Weights, means, scatters and per-component radial families."""

    weights: np.ndarray
    means: list
    scatters: list
    generators: list

    def __post_init__(self):
        self.weights = np.asarray(self.weights, float).reshape(-1)
        self.means = [np.asarray(m, float).reshape(-1) for m in self.means]
        self.scatters = [np.asarray(s, float) for s in self.scatters]
        self.generators = _as_generators(self.generators, self.k)
        if abs(self.weights.sum() - 1.0) > 1e-8 or np.any(self.weights <= 0):
            raise ValueError("weights must be positive and sum to 1")
        for s in self.scatters:
            _chol_spd(s)

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means[0].size

    def component(self, k) -> EllipticalComponent:
        return EllipticalComponent(self.means[k], self.scatters[k],
                                   self.generators[k])

    def sample(self, n, rng):
        """Draw n rows (and labels) with multinomial component counts."""
        counts = rng.multinomial(int(n), self.weights)
        rows, labels = [], []
        for k, c in enumerate(counts):
            if c:
                rows.append(self.component(k).sample(c, rng))
                labels.append(np.full(c, k))
        x = np.vstack(rows)
        return x, np.concatenate(labels)


@dataclass
class ReformulatedParams:
    """Weights, augmented SPD blocks, compensation scalars, radial families."""

    weights: np.ndarray
    blocks: list
    scales: np.ndarray
    generators: list

    def __post_init__(self):
        self.weights = np.asarray(self.weights, float).reshape(-1)
        self.blocks = [np.asarray(b, float) for b in self.blocks]
        self.scales = np.asarray(self.scales, float).reshape(-1)
        self.generators = _as_generators(self.generators, self.k)
        if np.any(self.scales <= 0):
            raise ValueError("compensation scalars must be > 0")

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.blocks[0].shape[0] - 1


def reformulate(mu, sigma, lam):
    """Embed (mu, Sigma, lam) into one augmented SPD matrix."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    return reformulate_blocks(mu, np.asarray(sigma, float), float(lam))


def decompose(block):
    """Inverse of ``reformulate``; raises DecompositionError when invalid."""
    block = np.asarray(block, float)
    m = block.shape[0] - 1
    lam = float(block[m, m])
    if not np.isfinite(lam) or lam <= 0:
        raise DecompositionError("augmented block has non-positive corner")
    mu = block[:m, m] / lam
    sigma = sym(block[:m, :m] - lam * np.outer(mu, mu))
    try:
        _chol_spd(sigma, "decomposed scatter")
    except (SingularScatterError, ValueError) as exc:
        raise DecompositionError(str(exc)) from exc
    return mu, sigma, lam


def from_original(params: MixtureParams, lam: float = 1.0) -> ReformulatedParams:
    """Lift means/scatters into augmented blocks with c = 1/lam."""
    blocks = [reformulate(mu, sig, lam)
              for mu, sig in zip(params.means, params.scatters)]
    return ReformulatedParams(params.weights.copy(), blocks,
                              np.full(params.k, 1.0 / lam), params.generators)


def to_original(params: ReformulatedParams) -> MixtureParams:
    """Decompose every augmented block back to (mu, Sigma)."""
    mus, sigs = [], []
    for b in params.blocks:
        mu, sig, _ = decompose(b)
        mus.append(mu)
        sigs.append(sig)
    return MixtureParams(params.weights.copy(), mus, sigs, params.generators)


# ---------------------------------------------------------------------------
# evaluation caches
# ---------------------------------------------------------------------------

class _Eval:
    """Shared state between a cost evaluation and the following gradient."""

    __slots__ = ("logf", "lse", "t", "chols", "valid", "cost", "prior_cost")

    @property
    def xi(self):
        with np.errstate(invalid="ignore"):
            out = np.exp(self.logf - self.lse[:, None])
        return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)


def _logsumexp_rows(logf):
    amax = logf.max(axis=1)
    ok = np.isfinite(amax)
    safe = np.where(ok, amax, 0.0)
    s = np.exp(logf - safe[:, None]).sum(axis=1)
    return np.where(ok, safe + np.log(s), -np.inf)


def _eval_original(params: MixtureParams, data: Dataset, chols=None):
    n, m = data.n, data.dim
    ev = _Eval()
    ev.t = np.empty((n, params.k))
    ev.logf = np.empty((n, params.k))
    ev.chols = chols or [None] * params.k
    logpi = np.log(params.weights)
    for k in range(params.k):
        if ev.chols[k] is None:
            ev.chols[k] = linalg.cholesky(params.scatters[k], lower=True)
        c = ev.chols[k]
        z = linalg.solve_triangular(c, (data.x - params.means[k]).T, lower=True,
                                    check_finite=False)
        t = np.einsum("dn,dn->n", z, z)
        ev.t[:, k] = t
        g = params.generators[k]
        ev.logf[:, k] = (logpi[k] + g.log_normalizer(m)
                         - np.log(np.diag(c)).sum() + g.log_g(t, m))
    ev.valid = None
    ev.lse = _logsumexp_rows(ev.logf)
    w = data.row_weights()
    ev.cost = float(-(w * ev.lse).sum()) if np.all(np.isfinite(ev.lse)) else np.inf
    ev.prior_cost = 0.0
    return ev


def _eval_reformulated(params: ReformulatedParams, data: Dataset, chols=None):
    n, m = data.n, data.dim
    y = data.y
    ev = _Eval()
    ev.t = np.empty((n, params.k))          # generator arguments u = ttilde - c
    ev.logf = np.empty((n, params.k))
    ev.valid = np.empty((n, params.k), dtype=bool)
    ev.chols = chols or [None] * params.k
    logpi = np.log(params.weights)
    for k in range(params.k):
        if ev.chols[k] is None:
            ev.chols[k] = linalg.cholesky(params.blocks[k], lower=True)
        c = ev.chols[k]
        z = linalg.solve_triangular(c, y.T, lower=True, check_finite=False)
        u = np.einsum("dn,dn->n", z, z) - params.scales[k]
        ev.t[:, k] = u
        g = params.generators[k]
        ok = u >= g.domain_min
        ev.valid[:, k] = ok
        base = (logpi[k] + g.log_normalizer(m)
                - 0.5 * np.log(params.scales[k]) - np.log(np.diag(c)).sum())
        lg = np.full(n, -np.inf)
        if ok.any():
            uu = u[ok]
            if g.domain_min == 0.0:
                uu = np.maximum(uu, T_CLAMP if g.clamp_at_zero else 0.0)
            lg[ok] = g._log_g(uu, m)
        ev.logf[:, k] = base + lg
    ev.lse = _logsumexp_rows(ev.logf)
    w = data.row_weights()
    ev.cost = float(-(w * ev.lse).sum()) if np.all(np.isfinite(ev.lse)) else np.inf
    ev.prior_cost = 0.0
    return ev


# ---------------------------------------------------------------------------
# public costs
# ---------------------------------------------------------------------------

def responsibilities(params: MixtureParams, data: Dataset):
    """Posterior component probabilities, one row per sample (rows sum to 1).

    Rows where every component underflows to zero density come back as NaN;
    ``nll`` reports such configurations as an infinite cost.
    """
    ev = _eval_original(params, data)
    with np.errstate(invalid="ignore", over="ignore"):
        xi = np.exp(ev.logf - ev.lse[:, None])
    xi[~np.isfinite(ev.lse)] = np.nan
    return xi


def nll(params: MixtureParams, data: Dataset, reg=None) -> float:
    """Weighted negative log-likelihood (optionally with the scatter prior)."""
    ev = _eval_original(params, data)
    cost = ev.cost
    if reg is not None:
        cost += _original_prior_cost(params, reg)
    return cost


def reformulated_cost(params: ReformulatedParams, data: Dataset, reg=None) -> float:
    """Cost of the augmented parameterization; +inf signals a rejected step."""
    ev = _eval_reformulated(params, data)
    cost = ev.cost
    if reg is not None:
        cost += _reformulated_prior_cost(params, reg)
    return cost


@dataclass
class Regularization:
    """Inverse-Wishart scatter prior: strength v >= 0 and SPD prior matrix."""

    v: float
    prior: np.ndarray

    def __post_init__(self):
        self.prior = np.asarray(self.prior, float)
        if self.v < 0:
            raise ValueError("v must be >= 0")
        if self.v > 0:
            _chol_spd(self.prior, "prior matrix")

    def padded(self, m):
        """S embedded in the augmented dimension: [[S, 0], [0, 0]]."""
        out = np.zeros((m + 1, m + 1))
        out[:m, :m] = self.prior
        return out


def _original_prior_cost(params, reg: Regularization):
    if reg.v == 0:
        return 0.0
    out = 0.0
    for k in range(params.k):
        c = linalg.cholesky(params.scatters[k], lower=True)
        logdet = 2.0 * np.log(np.diag(c)).sum()
        tr = float(np.trace(linalg.cho_solve((c, True), reg.prior)))
        out += 0.5 * reg.v * (logdet + tr)
    return out


def _reformulated_prior_cost(params, reg: Regularization):
    if reg.v == 0:
        return 0.0
    m = params.dim
    spad = reg.padded(m)
    out = 0.0
    for k in range(params.k):
        c = linalg.cholesky(params.blocks[k], lower=True)
        logdet = 2.0 * np.log(np.diag(c)).sum()
        tr = float(np.trace(linalg.cho_solve((c, True), spad)))
        out += 0.5 * reg.v * (np.log(params.scales[k]) + logdet + tr)
    return out


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def _psi_weights(gen, u, valid, dim):
    """xi-independent psi factors with the floored argument, zero where invalid."""
    out = np.zeros_like(u)
    if valid is None:
        out[:] = gen._psi(np.maximum(u, PSI_ARG_FLOOR), dim)
    elif valid.any():
        out[valid] = gen._psi(np.maximum(u[valid], PSI_ARG_FLOOR), dim)
    return out


def reformulated_gradients(params: ReformulatedParams, data: Dataset,
                           reg=None, ev=None):
    """Riemannian gradient on each augmented block, plus logit and log-scale
    gradients.  Requires a finite cost at ``params``."""
    if ev is None:
        ev = _eval_reformulated(params, data)
    if not np.isfinite(ev.cost):
        raise FloatingPointError("gradient requested at an infinite-cost point")
    m = data.dim
    y = data.y
    w = data.row_weights()
    xi = ev.xi * w[:, None]
    s = xi.sum(axis=0)
    grad_blocks = []
    grad_logc = np.empty(params.k)
    for k in range(params.k):
        g = params.generators[k]
        wpsi = xi[:, k] * _psi_weights(g, ev.t[:, k], ev.valid[:, k], m)
        gb = 0.5 * s[k] * params.blocks[k] + (y.T * wpsi) @ y
        glc = 0.5 * s[k] + params.scales[k] * wpsi.sum()
        if reg is not None and reg.v > 0:
            gb = gb + 0.5 * reg.v * (params.blocks[k] - reg.padded(m))
            glc += 0.5 * reg.v
        grad_blocks.append(sym(gb))
        grad_logc[k] = glc
    grad_logits = -(s - params.weights * data.total_weight)
    return grad_blocks, grad_logits, grad_logc


def original_gradients(params: MixtureParams, data: Dataset, reg=None, ev=None):
    """Euclidean mean gradients, Riemannian scatter gradients, logit gradient."""
    if ev is None:
        ev = _eval_original(params, data)
    if not np.isfinite(ev.cost):
        raise FloatingPointError("gradient requested at an infinite-cost point")
    m = data.dim
    w = data.row_weights()
    xi = ev.xi * w[:, None]
    s = xi.sum(axis=0)
    grad_means, grad_scatters = [], []
    for k in range(params.k):
        g = params.generators[k]
        wpsi = xi[:, k] * _psi_weights(g, ev.t[:, k], None, m)
        d = data.x - params.means[k]
        gmu = 2.0 * linalg.cho_solve((ev.chols[k], True), wpsi @ d)
        gs = 0.5 * s[k] * params.scatters[k] + (d.T * wpsi) @ d
        if reg is not None and reg.v > 0:
            gs = gs + 0.5 * reg.v * (params.scatters[k] - reg.prior)
        grad_means.append(gmu)
        grad_scatters.append(sym(gs))
    grad_logits = -(s - params.weights * data.total_weight)
    return grad_means, grad_scatters, grad_logits


# ---------------------------------------------------------------------------
# stationarity diagnostics
# ---------------------------------------------------------------------------

def fixed_point_residuals(params: ReformulatedParams, data: Dataset, v: float = 0.0,
                          prior: np.ndarray | None = None):
    """Relative residuals of the stationarity system at an augmented point.

    Decomposes each block to (mu_k, Sigma_k), evaluates original-space
    responsibilities and psi weights, and measures how far the point is from
    the reweighting fixed point: the scale equation
    c_k = -(sum xi + v) / (2 sum xi psi), the block equation
    S_k = (-2 sum xi psi y y^T + v S_pad) / (sum xi + v), and the weight
    equation pi_k = sum xi / N.  All three vanish at a converged optimum.
    """
    orig = to_original(params)
    ev = _eval_original(orig, data)
    m = data.dim
    y = data.y
    w = data.row_weights()
    xi = ev.xi * w[:, None]
    spad = np.zeros((m + 1, m + 1))
    if v > 0 and prior is not None:
        spad[:m, :m] = prior
    out = []
    for k in range(params.k):
        g = params.generators[k]
        psi = _psi_weights(g, ev.t[:, k], None, m)
        s = xi[:, k].sum()
        spsi = float(xi[:, k] @ psi)
        c_hat = -(s + v) / (2.0 * spsi)
        block_hat = ((y.T * (-2.0 * xi[:, k] * psi)) @ y + v * spad) / (s + v)
        pi_hat = s / data.total_weight
        out.append({
            "scale": abs(params.scales[k] - c_hat) / max(abs(c_hat), 1e-30),
            "scatter": float(np.linalg.norm(params.blocks[k] - block_hat)
                             / max(np.linalg.norm(block_hat), 1e-30)),
            "weight": abs(params.weights[k] - pi_hat) / max(pi_hat, 1e-30),
        })
    return out


# ---------------------------------------------------------------------------
# model JSON schema
# ---------------------------------------------------------------------------

def params_to_json(params: MixtureParams, solver_meta=None, scales=None) -> dict:
    out = {
        "dim": params.dim,
        "components": [
            {
                "weight": float(params.weights[k]),
                "family": params.generators[k].name,
                "mean": [float(v) for v in params.means[k]],
                "scatter": [[float(v) for v in row] for row in params.scatters[k]],
            }
            for k in range(params.k)
        ],
        "solver_meta": dict(solver_meta or {}),
    }
    if scales is not None:
        out["solver_meta"]["scales"] = [float(c) for c in scales]
    return out


def params_from_json(doc) -> MixtureParams:
    if isinstance(doc, str):
        doc = json.loads(doc)
    comps = doc["components"]
    return MixtureParams(
        np.array([c["weight"] for c in comps]),
        [np.array(c["mean"], float) for c in comps],
        [np.array(c["scatter"], float) for c in comps],
        [c["family"] for c in comps])
