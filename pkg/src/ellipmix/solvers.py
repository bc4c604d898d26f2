"""The three mixture estimators and their shared machinery.

* ``fit_our`` -- Riemannian conjugate gradient on the reformulated cost over
  the product of augmented SPD blocks, weight logits and log compensation
  scalars; the route that stays stable for every supported family.
* ``fit_rmo`` -- the same conjugate-gradient engine on the plain negative
  log-likelihood over scatters, Euclidean means and logits (no
  reformulation); the direct-manifold baseline.
* ``fit_ira`` -- fixed-point iteration of the reweighting equations
  (an EM sweep for the scale-mixture families, not convergent in general).

All solvers share FitOptions/FitReport, record a per-iteration cost trace,
and report failures (singular scatter, infinite cost, failed decomposition)
in the report instead of raising.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from . import geometry as geo
from .elliptical import SINGULARITY_RATIO
from .generators import get_generator
from .mixture import (Dataset, DecompositionError, MixtureParams,
                      Regularization, ReformulatedParams, _eval_original,
                      _eval_reformulated, _original_prior_cost, _psi_weights,
                      fixed_point_residuals, from_original, nll,
                      original_gradients, params_to_json,
                      reformulated_gradients, to_original)

FAILURE_REASONS = ("singular_scatter", "infinite_cost",
                   "max_iterations_nondecreasing", "decomposition_error")


@dataclass
class FitOptions:
    """Knobs shared by all solvers (defaults follow the evaluation protocol)."""

    max_iterations: int = 1000
    tol: float = 1e-10              # adjacent-iteration cost decrease
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50
    cg_restart: int | None = None   # default: K * D(D+1)/2, D = SPD block size
    reg_v: float = 0.0
    reg_prior: np.ndarray | None = None
    seed: int | None = None
    polish_iterations: int = 100    # extra CG iterations after the cost stop

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.reg_v < 0:
            raise ValueError("reg_v must be >= 0")

    def regularization(self, dim) -> Regularization | None:
        if self.reg_v == 0:
            return None
        prior = np.eye(dim) if self.reg_prior is None else self.reg_prior
        return Regularization(self.reg_v, prior)


@dataclass
class FitReport:
    """Outcome of one fit: final parameters, trace and failure bookkeeping."""

    solver: str
    params: MixtureParams | None
    cost_trace: list
    iterations: int
    seconds: float
    failed: bool = False
    failure_reason: str | None = None
    scales: np.ndarray | None = None          # compensation scalars (fit_our)
    residuals: list | None = None             # fixed-point residuals (fit_our)

    @property
    def final_cost(self) -> float:
        return self.cost_trace[-1] if self.cost_trace else math.inf

    def to_json(self) -> dict:
        return {
            "iterations": int(self.iterations),
            "seconds": float(self.seconds),
            "failed": bool(self.failed),
            "reason": self.failure_reason,
            "cost_trace": [float(c) for c in self.cost_trace],
            "model": None if self.params is None else params_to_json(
                self.params, solver_meta={"solver": self.solver},
                scales=self.scales),
        }


def _scatter_is_singular(sigma):
    try:
        ev = np.linalg.eigvalsh(sigma)
    except np.linalg.LinAlgError:
        return True
    return (not np.all(np.isfinite(ev)) or ev[0] <= 0
            or ev[-1] > SINGULARITY_RATIO * ev[0])


# ---------------------------------------------------------------------------
# conjugate-gradient core (Hestenes-Stiefel with Armijo backtracking)
# ---------------------------------------------------------------------------

def _cg_minimize(point, cost_fn, grad_fn, opts: FitOptions, restart_period,
                 grad_target=0.0):
    """Minimize cost_fn over the product manifold starting at ``point``.

    grad_fn returns (gradient, preconditioner) where the preconditioner is a
    callable mapping tangents to inverse-curvature-scaled tangents (or None
    for plain CG).  Returns (point, trace, iterations, stopped_reason) with
    stopped_reason one of "converged", "max_iterations", "infinite_start".
    """
    cost, ev = cost_fn(point)
    trace = [cost]
    if not np.isfinite(cost):
        return point, trace, 0, "infinite_start"
    grad, pre = grad_fn(point, ev)
    pgrad = pre(grad) if pre else grad
    gnorm2 = geo.product_inner(point, grad, grad)
    direction = pgrad.scaled(-1.0)
    prev_alpha = 1.0 if pre else 1.0 / max(math.sqrt(gnorm2), 1.0)
    prev_decrease = None
    polish_left = opts.polish_iterations
    best_gnorm = math.sqrt(gnorm2)
    stale = 0
    it = 0
    while it < opts.max_iterations:
        it += 1
        slope = geo.product_inner(point, grad, direction)
        if not np.isfinite(slope) or slope >= 0:
            direction = pgrad.scaled(-1.0)
            slope = geo.product_inner(point, grad, direction)
        if pre is not None:
            alpha = 1.0  # the preconditioner makes a unit step natural
        elif prev_decrease is not None and slope < 0:
            alpha = min(max(2.0 * prev_decrease / -slope, 1e-20), 1e12)
        else:
            alpha = prev_alpha

        def try_step(a):
            try:
                cand = geo.product_retract(point, direction.scaled(a))
                c, e = cost_fn(cand)
                return cand, c, e
            except geo.RetractionError:
                return None, math.inf, None

        accepted = False
        tried_steepest = False
        while True:
            a = alpha
            for _ in range(opts.max_backtracks + 1):
                cand, cand_cost, cand_ev = try_step(a)
                if cand_cost <= cost + opts.armijo * a * slope:
                    accepted = True
                    break
                a *= opts.backtrack
            if accepted or tried_steepest:
                break
            # retry once along (preconditioned) steepest descent
            direction = pgrad.scaled(-1.0)
            slope = geo.product_inner(point, grad, direction)
            alpha = prev_alpha
            tried_steepest = True
        if not accepted:
            return point, trace, it - 1, "converged"
        # one quadratic-interpolation refinement: phi(0), phi'(0), phi(a)
        curv = cand_cost - cost - slope * a
        if curv > 0:
            a_q = -slope * a * a / (2.0 * curv)
            if a_q > 0 and abs(a_q - a) > 1e-2 * a:
                cand_q, cost_q, ev_q = try_step(a_q)
                if cost_q < cand_cost:
                    cand, cand_cost, cand_ev, a = cand_q, cost_q, ev_q, a_q
        decrease = cost - cand_cost
        new_grad, new_pre = grad_fn(cand, cand_ev)
        new_pgrad = new_pre(new_grad) if new_pre else new_grad
        t_grad = geo.product_transport(point, cand, grad)
        t_dir = geo.product_transport(point, cand, direction)
        diff = new_grad.plus(t_grad, -1.0)
        new_gnorm2 = geo.product_inner(cand, new_grad, new_grad)
        denom = geo.product_inner(cand, t_dir, diff)
        overlap = abs(geo.product_inner(cand, new_grad, t_grad))
        if (it % restart_period == 0 or denom == 0 or not np.isfinite(denom)
                or overlap > 0.2 * new_gnorm2):  # Powell's staleness test
            direction = new_pgrad.scaled(-1.0)
        else:
            pdiff = new_pre(diff) if new_pre else diff
            beta = max(geo.product_inner(cand, pdiff, new_grad) / denom, 0.0)
            direction = new_pgrad.scaled(-1.0).plus(t_dir, beta)
        point, cost, ev = cand, cand_cost, cand_ev
        grad, pgrad, pre = new_grad, new_pgrad, new_pre
        gnorm2 = new_gnorm2
        prev_alpha, prev_decrease = a, max(decrease, 0.0)
        trace.append(cost)
        gnorm = math.sqrt(max(gnorm2, 0.0))
        if decrease < opts.tol:
            if gnorm <= grad_target or polish_left <= 0:
                return point, trace, it, "converged"
            polish_left -= 1
            if gnorm < 0.99 * best_gnorm:
                best_gnorm = gnorm
                stale = 0
            else:
                stale += 1
                if stale >= 15:
                    return point, trace, it, "converged"
    return point, trace, it, "max_iterations"


# ---------------------------------------------------------------------------
# the reformulated solver
# ---------------------------------------------------------------------------

def fit_our(init: MixtureParams, data: Dataset,
            opts: FitOptions | None = None) -> FitReport:
    """Riemannian CG on the reformulated cost, restricted to c = 1/lam.

    The re-designed cost with a fully free compensation scalar is unbounded
    below (it decreases without limit as c -> 0 at fixed blocks; the
    stationary point of the fixed-point system is a maximum along the pure-c
    direction), so plain descent over a free c diverges.  On the submanifold
    c_k = 1/lam_k (lam_k = the corner entry of the augmented block) the
    compensation cancels the reformulation exactly and the cost equals the
    plain negative log-likelihood, while the search still runs with the
    augmented-cone geometry that makes the reformulation fast.  On success
    the scalars are gauge-fixed to their stationarity values
    c_k = -(sum_n xi_nk + v) / (2 sum_n xi_nk psi_k(t_nk)), after which all
    three blocks of the reformulated gradient vanish at the solution.
    """
    opts = opts or FitOptions()
    t0 = time.perf_counter()
    start = from_original(init, lam=1.0)
    gens = start.generators
    k, d = start.k, data.dim + 1
    reg = opts.regularization(data.dim)
    point = geo.ProductPoint([b.copy() for b in start.blocks],
                             np.log(start.weights))

    def as_params(p):
        scales = np.array([1.0 / b[-1, -1] for b in p.spd_blocks])
        return ReformulatedParams(p.weights, p.spd_blocks, scales, gens)

    def cost_fn(p):
        try:
            params = as_params(p)
            ev = _eval_reformulated(params, data, chols=p.chols)
        except (ValueError, linalg.LinAlgError):
            return math.inf, None  # degenerate corner on a trial step
        p.chols = ev.chols
        c = ev.cost
        if reg is not None and np.isfinite(c):
            c += _reform_prior(params, reg, data.dim)
        return c, ev

    w_total = data.total_weight

    def grad_fn(p, ev):
        params = as_params(p)
        gb, gl, gc = reformulated_gradients(params, data, reg=reg, ev=ev)
        # chain rule for the tie c = 1/lam: the Euclidean correction
        # -(dJ/dc) lam^-2 e_d e_d^T becomes -gc_k c_k s s^T after the
        # metric raising, with s the last column of the block.
        tied = []
        for kk in range(k):
            s = p.spd_blocks[kk][:, -1]
            tied.append(gb[kk] - gc[kk] * params.scales[kk] * np.outer(s, s))
        # per-block curvature scales: the block Hessian under the affine
        # metric grows with the responsibility mass (plus the prior strength
        # v on the scatter/scale directions, but NOT on the mean directions,
        # where the prior is flat), the logit Hessian is the softmax Fisher
        # matrix ~ W diag(pi); dividing by them makes a unit step natural
        # (and lets dying components shed weight geometrically, as the
        # reweighting iteration does).  Blocks of components whose mass has
        # collapsed are frozen: their stationarity conditions turn vacuous
        # as pi -> 0 and chasing them drives the block singular.
        raw = (ev.xi * data.row_weights()[:, None]).sum(axis=0)
        for kk in range(k):
            # starving components (too little mass to support a full-rank
            # scatter) head for the unbounded-likelihood collapse, as do
            # blocks whose factorization is already nearly singular
            diag = np.diag(p.chol(kk))
            if raw[kk] < max(1e-6 * w_total, 2.0 * data.dim) \
                    or (diag.max() / diag.min()) ** 2 > 1e10:
                tied[kk] = np.zeros_like(tied[kk])
        counts = np.maximum(raw, 1e-3 * w_total)
        logit_scale = w_total * np.maximum(params.weights, 1e-10)
        v = reg.v if reg is not None else 0.0
        chols = [p.chol(kk) for kk in range(k)] if v > 0 else None
        blocks = [b.copy() for b in p.spd_blocks] if v > 0 else None

        def pre(tan):
            if v == 0:
                parts = [t * (2.0 / c) for t, c in zip(tan.spd_parts, counts)]
            else:
                parts = [
                    _split_block_scale(t, blocks[kk], chols[kk], counts[kk], v)
                    for kk, t in enumerate(tan.spd_parts)]
            return geo.ProductTangent(parts, tan.logits / logit_scale)

        return geo.ProductTangent(tied, gl), pre

    restart = opts.cg_restart or max(k * d * (d + 1) // 2, 10)
    point, trace, iters, reason = _cg_minimize(
        point, cost_fn, grad_fn, opts, restart,
        grad_target=2e-7 * data.total_weight)
    seconds = time.perf_counter() - t0
    if reason == "infinite_start":
        return FitReport("our", None, trace, iters, seconds,
                         failed=True, failure_reason="infinite_cost")
    final = as_params(point)
    try:
        params = to_original(final)
    except DecompositionError:
        return FitReport("our", None, trace, iters, seconds,
                         failed=True, failure_reason="decomposition_error")
    if any(_scatter_is_singular(s) for s in params.scatters):
        return FitReport("our", params, trace, iters, seconds,
                         failed=True, failure_reason="singular_scatter")
    scales, blocks = _stationary_scales(params, data, opts.reg_v)
    try:
        gauged = ReformulatedParams(params.weights.copy(), blocks, scales, gens)
        residuals = fixed_point_residuals(
            gauged, data, v=opts.reg_v,
            prior=None if reg is None else reg.prior)
    except (DecompositionError, ValueError, linalg.LinAlgError):
        residuals = None  # diagnostics unavailable near a borderline scatter
    return FitReport("our", params, trace, iters, seconds,
                     scales=scales, residuals=residuals)


def _split_block_scale(tan, block, chol, count, v):
    """Inverse-curvature scaling of one augmented-block tangent under a prior.

    The scatter prior stiffens the scatter/scale directions of the block by
    v but leaves the mean directions untouched, so the natural scales are
    2/(count+v) off the mean subspace and 2/count on it.  The mean subspace
    at a block S = reformulate(mu, Sigma, lam) consists of the tangents
    V(b) = d/dt reformulate(mu + t b, Sigma, lam); the metric-orthogonal
    projection of tan onto it is V(Sigma (A11 mu + a12)) with
    A = S^-1 tan S^-1.
    """
    m = block.shape[0] - 1
    lam = block[m, m]
    mu = block[:m, m] / lam
    sigma = block[:m, :m] - lam * np.outer(mu, mu)
    a = linalg.cho_solve((chol, True),
                         linalg.cho_solve((chol, True), tan).T)
    w = sigma @ (a[:m, :m] @ mu + a[:m, m])
    proj = np.zeros_like(block)
    proj[:m, :m] = lam * (np.outer(w, mu) + np.outer(mu, w))
    proj[:m, m] = lam * w
    proj[m, :m] = lam * w
    return (2.0 / (count + v)) * tan + (2.0 / count - 2.0 / (count + v)) * proj


def _stationary_scales(params: MixtureParams, data: Dataset, v: float):
    """Gauge-fix the compensation scalars to -(sum xi + v)/(2 sum xi psi)."""
    ev = _eval_original(params, data)
    xi = ev.xi * data.row_weights()[:, None]
    scales, blocks = [], []
    for kk in range(params.k):
        g = params.generators[kk]
        psi = _psi_weights(g, ev.t[:, kk], None, data.dim)
        s = xi[:, kk].sum()
        spsi = float(xi[:, kk] @ psi)
        c = -(s + v) / (2.0 * spsi) if spsi < 0 else math.nan
        if not np.isfinite(c) or not 1e-12 < c < 1e12:
            c = 1.0  # degenerate psi average; keep the neutral gauge
        scales.append(c)
        blocks.append(from_original(
            MixtureParams([1.0], [params.means[kk]], [params.scatters[kk]],
                          [g]), lam=1.0 / c).blocks[0])
    return np.array(scales), blocks


def _reform_prior(params: ReformulatedParams, reg: Regularization, m):
    out = 0.0
    spad = reg.padded(m)
    for kk, b in enumerate(params.blocks):
        c = linalg.cholesky(b, lower=True)
        logdet = 2.0 * np.log(np.diag(c)).sum()
        tr = float(np.trace(linalg.cho_solve((c, True), spad)))
        out += 0.5 * reg.v * (np.log(params.scales[kk]) + logdet + tr)
    return out


# ---------------------------------------------------------------------------
# the direct-manifold baseline
# ---------------------------------------------------------------------------

def fit_rmo(init: MixtureParams, data: Dataset,
            opts: FitOptions | None = None) -> FitReport:
    """CG on the plain cost over scatters, Euclidean means and logits."""
    opts = opts or FitOptions()
    t0 = time.perf_counter()
    gens = init.generators
    k, d = init.k, data.dim
    reg = opts.regularization(d)
    point = geo.ProductPoint([s.copy() for s in init.scatters],
                             np.log(init.weights),
                             None, [m.copy() for m in init.means])

    def as_params(p):
        return MixtureParams(p.weights, p.means, p.spd_blocks, gens)

    def cost_fn(p):
        ev = _eval_original(as_params(p), data, chols=p.chols)
        p.chols = ev.chols
        c = ev.cost
        if reg is not None and np.isfinite(c):
            for kk, s in enumerate(p.spd_blocks):
                ch = p.chol(kk)
                c += 0.5 * reg.v * (
                    2.0 * np.log(np.diag(ch)).sum()
                    + float(np.trace(linalg.cho_solve((ch, True), reg.prior))))
        return c, ev

    def grad_fn(p, ev):
        gm, gs, gl = original_gradients(as_params(p), data, reg=reg, ev=ev)
        return geo.ProductTangent(gs, gl, None, gm), None

    restart = opts.cg_restart or max(k * d * (d + 1) // 2, 10)
    point, trace, iters, reason = _cg_minimize(
        point, cost_fn, grad_fn, opts, restart,
        grad_target=2e-7 * data.total_weight)
    seconds = time.perf_counter() - t0
    if reason == "infinite_start":
        return FitReport("rmo", None, trace, iters, seconds,
                         failed=True, failure_reason="infinite_cost")
    params = as_params(point)
    if any(_scatter_is_singular(s) for s in params.scatters):
        return FitReport("rmo", params, trace, iters, seconds,
                         failed=True, failure_reason="singular_scatter")
    return FitReport("rmo", params, trace, iters, seconds)


# ---------------------------------------------------------------------------
# fixed-point reweighting
# ---------------------------------------------------------------------------

def fit_ira(init: MixtureParams, data: Dataset,
            opts: FitOptions | None = None,
            update_scatters: bool = True,
            fixed_scatters: list | None = None) -> FitReport:
    """Iterate the reweighting equations pi -> mu -> Sigma.

    The mean update uses the psi weights of the current iterate; the scatter
    update reuses those weights around the fresh means.  With ``reg_v > 0``
    the scatter line gains +v*prior in the numerator and +v in the
    denominator.  ``update_scatters=False`` freezes the scatters (the
    soft-threshold mean-shift special case).
    """
    opts = opts or FitOptions()
    t0 = time.perf_counter()
    reg = opts.regularization(data.dim)
    params = MixtureParams([w for w in init.weights],
                           [m.copy() for m in init.means],
                           [s.copy() for s in init.scatters], init.generators)
    w_row = data.row_weights()
    total = data.total_weight
    trace = []
    best = math.inf
    failure = None
    it = 0
    for it in range(1, opts.max_iterations + 1):
        ev = _eval_original(params, data)
        cost = ev.cost
        if reg is not None and np.isfinite(cost):
            cost += _original_prior_cost(params, reg)
        if not np.isfinite(cost):
            failure = "infinite_cost"
            break
        trace.append(cost)
        best = min(best, cost)
        if len(trace) >= 2 and abs(trace[-2] - trace[-1]) < opts.tol:
            break
        xi = ev.xi * w_row[:, None]
        s = xi.sum(axis=0)
        if np.any(s < 1e-12 * total):
            failure = "singular_scatter"
            break
        new_weights = s / total
        new_means, new_scatters = [], []
        for k in range(params.k):
            g = params.generators[k]
            wpsi = xi[:, k] * _psi_weights(g, ev.t[:, k], None, data.dim)
            denom = wpsi.sum()
            if denom == 0 or not np.isfinite(denom):
                failure = "singular_scatter"
                break
            mu = (wpsi @ data.x) / denom
            if not np.all(np.isfinite(mu)):
                failure = "singular_scatter"
                break
            new_means.append(mu)
            if update_scatters:
                d = data.x - mu
                num = -2.0 * (d.T * wpsi) @ d
                if reg is not None:
                    num = num + reg.v * reg.prior
                    sig = num / (s[k] + reg.v)
                else:
                    sig = num / s[k]
                if _scatter_is_singular(sig):
                    failure = "singular_scatter"
                    break
                new_scatters.append(geo.sym(sig))
            else:
                new_scatters.append(
                    params.scatters[k] if fixed_scatters is None
                    else fixed_scatters[k])
        if failure:
            break
        try:
            params = MixtureParams(new_weights, new_means, new_scatters,
                                   params.generators)
        except (ValueError, np.linalg.LinAlgError):
            failure = "singular_scatter"
            break
    seconds = time.perf_counter() - t0
    if failure is None and it >= opts.max_iterations and trace \
            and trace[-1] > best + opts.tol:
        failure = "max_iterations_nondecreasing"
    return FitReport("ira", params, trace, it, seconds,
                     failed=failure is not None, failure_reason=failure)


def mean_shift(data: Dataset, sigma2: float, generator, k: int,
               opts: FitOptions | None = None, rng=None):
    """Soft-threshold mode seeking: scatters pinned to sigma2 * I.

    Only the mean line of the reweighting system iterates (weights update
    normally); with a Gaussian family and unit responsibilities this is
    exactly the classical mean-shift sweep.
    Returns (means, FitReport).
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be > 0")
    opts = opts or FitOptions()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(opts.seed if rng is None else rng)
    gen = get_generator(generator) if isinstance(generator, str) else generator
    init = initialize(data, k, gen, scheme="random", rng=rng)
    init = MixtureParams(init.weights,
                         init.means,
                         [sigma2 * np.eye(data.dim) for _ in range(k)],
                         init.generators)
    report = fit_ira(init, data, opts, update_scatters=False)
    means = np.vstack(report.params.means)
    return means, report


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def initialize(data: Dataset, k: int, families, scheme: str = "random",
               rng=None) -> MixtureParams:
    """Seed a mixture from the data.

    random    -- means are k distinct data rows; every scatter is the global
                 data covariance plus the ridge 1e-6 * trace/M * I.
    kmeans_pp -- squared-distance seeding for the means, then per-cluster
                 covariances of the hard assignment (same ridge) and weights
                 from the cluster fractions.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n, m = data.n, data.dim
    if k > n:
        raise ValueError("need at least as many rows as components")
    cov = np.cov(data.x.T).reshape(m, m)
    ridge = 1e-6 * np.trace(cov) / m
    cov_r = cov + ridge * np.eye(m)
    if scheme == "random":
        idx = rng.choice(n, size=k, replace=False)
        means = [data.x[i].copy() for i in idx]
        scatters = [cov_r.copy() for _ in range(k)]
        weights = np.full(k, 1.0 / k)
    elif scheme in ("kmeans_pp", "kmeans++"):
        # squared-distance seeding with the usual greedy candidate pool
        trials = 2 + int(math.log(k))
        centers = [int(rng.integers(n))]
        d2 = ((data.x - data.x[centers[0]]) ** 2).sum(axis=1)
        for _ in range(k - 1):
            p = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1.0 / n)
            cand = rng.choice(n, size=trials, p=p)
            pots = [np.minimum(d2, ((data.x - data.x[c]) ** 2).sum(axis=1))
                    for c in cand]
            best = int(np.argmin([pot.sum() for pot in pots]))
            centers.append(int(cand[best]))
            d2 = pots[best]
        cx = data.x[centers]
        assign = np.argmin(((data.x[:, None, :] - cx[None]) ** 2).sum(-1), axis=1)
        means, scatters, weights = [], [], np.empty(k)
        for j in range(k):
            rows = data.x[assign == j]
            means.append(cx[j].copy())
            if len(rows) > 1:
                s = np.cov(rows.T, bias=False).reshape(m, m)
            else:
                s = np.zeros((m, m))
            scatters.append(s + ridge * np.eye(m))
            weights[j] = max(len(rows), 1) / n
        weights = weights / weights.sum()
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return MixtureParams(weights, means, scatters, families)


SOLVERS = {"our": fit_our, "ira": fit_ira, "rmo": fit_rmo}


def expand_family_spec(spec: str, k: int):
    """Comma list of length 1 (broadcast) or k; "mix" = cauchy/gaussian halves."""
    if spec.lower() == "mix":
        return ["cauchy" if i < k // 2 else "gaussian" for i in range(k)]
    parts = [s.strip() for s in spec.split(",")]
    if len(parts) == 1:
        parts = parts * k
    if len(parts) != k:
        raise ValueError(f"family list must have 1 or {k} entries")
    return [get_generator(p).name for p in parts]


def benchmark(synthetic_spec, families, solvers, restarts: int,
              opts: FitOptions | None = None, init_scheme: str = "random"):
    """Repeated fits on one synthetic dataset; one summary row per (family, solver).

    All restarts of all solvers share the dataset and, per restart index, the
    same initialization, so solver comparisons are paired.  Restarts may run
    concurrently (EMM_THREADS caps the pool); rows are merged in seed order.
    """
    from .datagen import make_synthetic

    opts = opts or FitOptions()
    data, _truth = make_synthetic(synthetic_spec)
    base_seed = synthetic_spec.seed if opts.seed is None else opts.seed
    workers = int(os.environ.get("EMM_THREADS", "0") or 0) \
        or min(4, os.cpu_count() or 1)
    rows, details = [], {}
    for family in families:
        fams = expand_family_spec(family, synthetic_spec.k)
        inits = [initialize(data, synthetic_spec.k, fams, scheme=init_scheme,
                            rng=np.random.default_rng((base_seed, 7, r)))
                 for r in range(restarts)]
        for solver in solvers:
            fit = SOLVERS[solver]
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    reports = list(pool.map(lambda i: fit(i, data, opts), inits))
            else:
                reports = [fit(i, data, opts) for i in inits]
            ok = [r for r in reports if not r.failed]
            row = {
                "family": family,
                "solver": solver,
                "restarts": restarts,
                "fail_ratio": 1.0 - len(ok) / restarts,
                "iterations_mean": float(np.mean([r.iterations for r in ok])) if ok else math.nan,
                "iterations_std": float(np.std([r.iterations for r in ok])) if ok else math.nan,
                "seconds_mean": float(np.mean([r.seconds for r in ok])) if ok else math.nan,
                "seconds_std": float(np.std([r.seconds for r in ok])) if ok else math.nan,
                "cost_mean": float(np.mean([r.final_cost for r in ok])) if ok else math.nan,
                "cost_per_sample_x100": float(np.mean(
                    [100.0 * r.final_cost / data.n for r in ok])) if ok else math.nan,
            }
            rows.append(row)
            details[(family, solver)] = reports
    return rows, details
