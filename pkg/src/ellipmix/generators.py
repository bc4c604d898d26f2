"""Radial density generators of the supported elliptical families.

An elliptical density on R^M is ``kappa(M) * det(Sigma)^{-1/2} * ghat(t)``
with Mahalanobis distance ``t = (x-mu)^T Sigma^{-1} (x-mu)``.  Each family
here defines the unnormalized radial profile ``ghat`` together with its
log-derivative ``psi(t) = ghat'(t)/ghat(t)`` and ``psi'(t)``, both in closed
form.  The normalizer ``kappa(M)`` is computed numerically from the radial
integral

    I(M) = int_0^inf u^{M/2 - 1} ghat(u) du,

as ``log kappa = lgamma(M/2) - (M/2) log pi - log I(M)``, which makes the
density integrate to one.  Mixtures whose components come from different
families need these absolute normalizers for the responsibilities to be
meaningful.

The distribution of the squared radius R^2 of the stochastic representation
``x = mu + R * Lambda * u`` has density proportional to ``u^{M/2-1} ghat(u)``;
``radial_sampler`` draws from it either by the chi-square shortcut (Gaussian)
or by inverse-CDF lookup on a tabulated grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammaln, kve

# Families whose ghat is singular (or zero with infinite slope) at t = 0 are
# evaluated at this clamped argument instead of raising.
T_CLAMP = 1e-300

_EULER_GAMMA = 0.5772156649015329


def _log_kv(nu, z):
    """log K_nu(z), stable from tiny to huge z.

    Uses the exponentially scaled Bessel function for ordinary arguments, the
    small-argument leading term below z = 1e-6 (kve overflows there for large
    |nu|) and the large-argument expansion above z = 1e8 (kve breaks down).
    """
    nu = abs(float(nu))
    z = np.asarray(z, dtype=float)
    small = z < 1e-6
    large = z > 1e8
    zs = np.where(small | large, 1.0, z)
    out = np.log(kve(nu, zs)) - zs
    if np.any(small):
        zt = np.where(small, z, 1.0)
        if nu < 1e-12:
            lead = np.log(np.log(2.0 / zt) - _EULER_GAMMA)
        else:
            lead = math.log(0.5) + gammaln(nu) + nu * (math.log(2.0) - np.log(zt))
        out = np.where(small, lead, out)
    if np.any(large):
        zt = np.where(large, z, 1.0)
        tail = -zt + 0.5 * np.log(math.pi / 2.0 / zt) \
            + np.log1p((4.0 * nu * nu - 1.0) / (8.0 * zt))
        out = np.where(large, tail, out)
    return out


class DensityGenerator:
    """One radial family: log ghat, psi, psi', normalizer, radial sampler.

    Instances are stateless apart from per-dimension caches and can be shared
    freely across threads.
    """

    #: spec string used in CLI/JSON interfaces
    name: str = ""
    #: whether the family is heavy tailed
    heavy_tailed: bool = False
    #: generator arguments below this value carry zero density (used by the
    #: reformulated cost, whose argument can leave [0, inf) during a step)
    domain_min: float = 0.0
    #: families singular at 0 get their argument clamped to T_CLAMP
    clamp_at_zero: bool = False

    def __init__(self):
        self._norm_cache: dict[int, float] = {}
        self._radial_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def __repr__(self):
        return f"{type(self).__name__}()"

    # -- family-specific raw forms (t already validated/clamped) -------------
    def _log_g(self, t, dim):
        raise NotImplementedError

    def _psi(self, t, dim):
        raise NotImplementedError

    def _psi_prime(self, t, dim):
        raise NotImplementedError

    # -- public, validating wrappers ------------------------------------------
    def log_g(self, t, dim):
        """log ghat(t) for t >= 0 (t = 0 is clamped for singular families)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError(f"{self.name}: generator argument must be >= 0")
        if self.clamp_at_zero:
            t = np.maximum(t, T_CLAMP)
        out = self._log_g(t, int(dim))
        return out if out.shape else float(out)

    def psi(self, t, dim):
        """psi(t) = d/dt log ghat(t), for t > 0."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError(f"{self.name}: psi requires t > 0")
        out = self._psi(t, int(dim))
        return out if out.shape else float(out)

    def psi_prime(self, t, dim):
        """psi'(t), for t > 0."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError(f"{self.name}: psi_prime requires t > 0")
        out = self._psi_prime(t, int(dim))
        return out if out.shape else float(out)

    # -- normalization ---------------------------------------------------------
    def radial_integrand(self, u, dim):
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp((0.5 * dim - 1.0) * np.log(np.maximum(u, T_CLAMP))
                          + self._log_g(np.maximum(u, T_CLAMP), dim))

    def radial_integral(self, dim):
        """I(M) = int_0^inf u^{M/2-1} ghat(u) du by split adaptive quadrature."""
        f = lambda u: self.radial_integrand(u, dim)
        head, e1 = integrate.quad(f, 0.0, 1.0, epsabs=1e-10, epsrel=1e-12, limit=400)
        tail, e2 = integrate.quad(f, 1.0, np.inf, epsabs=1e-10, epsrel=1e-12, limit=400)
        val = head + tail
        if not np.isfinite(val) or val <= 0 or (e1 + e2) > 1e-6 * max(val, 1.0):
            raise ArithmeticError(
                f"{self.name}: radial integral did not converge for M={dim} "
                f"(value={val!r}, err={e1 + e2!r})")
        return val

    def log_normalizer(self, dim):
        """log kappa(M) such that kappa * det(Sigma)^{-1/2} * ghat integrates to 1."""
        dim = int(dim)
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        if dim not in self._norm_cache:
            log_i = math.log(self.radial_integral(dim))
            self._norm_cache[dim] = (gammaln(0.5 * dim)
                                     - 0.5 * dim * math.log(math.pi) - log_i)
        return self._norm_cache[dim]

    # -- radial sampling -------------------------------------------------------
    def _radial_table(self, dim):
        """(knots, cdf) of R^2, built once per dimension.

        2048 log-spaced knots; the cumulative integral is accumulated by the
        trapezoid rule in log-space (the substitution u = e^s absorbs the
        u^{M/2-1} power so the integrand stays smooth near zero).
        """
        if dim in self._radial_cache:
            return self._radial_cache[dim]
        total = self.radial_integral(dim)
        lo = 1e-12
        hi = max(100.0, 10.0 * dim)
        f = lambda u: self.radial_integrand(u, dim)

        def mass_up_to(b):
            edges = np.concatenate([[0.0, 1.0], np.geomspace(10.0, b, 40)]) \
                if b > 10.0 else np.array([0.0, b])
            return sum(integrate.quad(f, a, c, limit=200)[0]
                       for a, c in zip(edges[:-1], edges[1:]))

        for _ in range(200):
            if total - mass_up_to(hi) < 1e-10 * total:
                break
            hi *= 4.0
        knots = np.geomspace(lo, hi, 2048)
        vals = knots * self.radial_integrand(knots, dim)  # du = u ds
        s = np.log(knots)
        incr = 0.5 * (vals[1:] + vals[:-1]) * np.diff(s)
        cdf = np.concatenate([[integrate.quad(f, 0.0, lo, limit=200)[0]],
                              np.cumsum(incr)])
        cdf /= cdf[-1]
        # enforce strict monotonicity for interpolation
        cdf = np.maximum.accumulate(cdf)
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self._radial_cache[dim] = (knots[keep], cdf[keep])
        return self._radial_cache[dim]

    def radial_sampler(self, dim, n, rng):
        """Draw n values of R^2 for this family in the given dimension."""
        u = rng.random(int(n))
        knots, cdf = self._radial_table(int(dim))
        return np.interp(u, cdf, knots)

    # -- robustness probes ------------------------------------------------------
    def robustness_flags(self, dim):
        """{covariance_robust, mean_robust, heavy_tailed} from psi-decay probes.

        A curve |psi(t) t^p| is called bounded when it never grows by more
        than 1% between consecutive probe points t in {1e3, 1e6, 1e9, 1e12};
        p = 1 governs the scatter, p = 1/2 the mean.
        """
        grid = np.array([1e3, 1e6, 1e9, 1e12])
        psi = self._psi(grid, int(dim))

        def plateaus(vals):
            vals = np.abs(vals)
            if not np.all(np.isfinite(vals)):
                return False
            prev = np.maximum(vals[:-1], 1e-30)
            return bool(np.all(vals[1:] <= 1.01 * prev))

        return {
            "covariance_robust": plateaus(psi * grid),
            "mean_robust": plateaus(psi * np.sqrt(grid)),
            "heavy_tailed": self.heavy_tailed,
        }


class Gaussian(DensityGenerator):
    """ghat(t) = exp(-t/2)."""

    name = "gaussian"
    domain_min = -np.inf

    def _log_g(self, t, dim):
        return -0.5 * t

    def _psi(self, t, dim):
        return np.full_like(t, -0.5)

    def _psi_prime(self, t, dim):
        return np.zeros_like(t)

    def log_normalizer(self, dim):
        return -0.5 * dim * math.log(2.0 * math.pi)

    def radial_sampler(self, dim, n, rng):
        return rng.chisquare(dim, size=int(n))


class Cauchy(DensityGenerator):
    """ghat(t) = (1+t)^{-(M+1)/2}."""

    name = "cauchy"
    heavy_tailed = True

    def _log_g(self, t, dim):
        return -0.5 * (dim + 1) * np.log1p(t)

    def _psi(self, t, dim):
        return -0.5 * (dim + 1) / (1.0 + t)

    def _psi_prime(self, t, dim):
        return 0.5 * (dim + 1) / (1.0 + t) ** 2

    def log_normalizer(self, dim):
        # closed form Gamma((M+1)/2) / pi^{(M+1)/2}
        return gammaln(0.5 * (dim + 1)) - 0.5 * (dim + 1) * math.log(math.pi)


class PowerExponential(DensityGenerator):
    """ghat(t) = t^a * exp(-b * t^beta); covers GG1.5, Weib0.9/1.1, Gamma1.1."""

    a = 0.0
    b = 0.5
    beta = 1.0

    def _log_g(self, t, dim):
        out = -self.b * t ** self.beta
        if self.a != 0.0:
            out = out + self.a * np.log(t)
        return out

    def _psi(self, t, dim):
        out = -self.b * self.beta * t ** (self.beta - 1.0)
        if self.a != 0.0:
            out = out + self.a / t
        return out

    def _psi_prime(self, t, dim):
        out = -self.b * self.beta * (self.beta - 1.0) * t ** (self.beta - 2.0)
        if self.a != 0.0:
            out = out - self.a / t ** 2
        return out


class GeneralizedGaussian15(PowerExponential):
    """ghat(t) = exp(-0.5 t^{1.5})."""

    name = "gg1.5"
    a, b, beta = 0.0, 0.5, 1.5


class Weibull09(PowerExponential):
    """ghat(t) = t^{-0.1} exp(-0.5 t^{0.9}); singular at 0."""

    name = "weib0.9"
    heavy_tailed = True
    clamp_at_zero = True
    a, b, beta = -0.1, 0.5, 0.9


class Weibull11(PowerExponential):
    """ghat(t) = t^{0.1} exp(-0.5 t^{1.1}); vanishes with a cusp at 0."""

    name = "weib1.1"
    clamp_at_zero = True
    a, b, beta = 0.1, 0.5, 1.1


class Gamma11(PowerExponential):
    """ghat(t) = t^{0.1} exp(-0.5 t); vanishes with a cusp at 0."""

    name = "gamma1.1"
    clamp_at_zero = True
    a, b, beta = 0.1, 0.5, 1.0


class Logistic(DensityGenerator):
    """ghat(t) = exp(-t) / (1 + exp(-t))^2, i.e. psi(t) = -tanh(t/2)."""

    name = "logistic"
    domain_min = -np.inf

    def _log_g(self, t, dim):
        return -t - 2.0 * np.logaddexp(0.0, -t)

    def _psi(self, t, dim):
        return -np.tanh(0.5 * t)

    def _psi_prime(self, t, dim):
        return -0.5 / np.cosh(0.5 * t) ** 2


class Laplace(DensityGenerator):
    """ghat(t) = K_nu(sqrt(2t)) / (sqrt(t/2))^{(M-2)/2} with nu = 1 - M/2.

    K_nu is the modified Bessel function of the second kind; its derivative
    enters psi through dK_nu/dz = -(K_{nu-1} + K_{nu+1})/2.
    """

    name = "laplace"
    heavy_tailed = True
    clamp_at_zero = True

    @staticmethod
    def _nu(dim):
        return 1.0 - 0.5 * dim

    def _log_g(self, t, dim):
        z = np.sqrt(2.0 * t)
        return _log_kv(self._nu(dim), z) - 0.25 * (dim - 2) * np.log(0.5 * t)

    def _kv_ratios(self, z, dim):
        """(K'/K, K''/K) at z via the exponentially scaled kve (the e^z cancels).

        Above z = 1e8 kve degrades, so the large-argument expansion of the
        log-derivative h = -1 - 1/(2z) + (4 nu^2 - 1)/(8 z^2) takes over
        (then K''/K = h' + h^2 with h' = 1/(2 z^2) + O(z^-3)).
        """
        nu = abs(self._nu(dim))
        z = np.asarray(z, dtype=float)
        large = z > 1e8
        zs = np.where(large, 1.0, z)
        k0 = kve(nu, zs)
        km1, kp1 = kve(nu - 1.0, zs), kve(nu + 1.0, zs)
        km2, kp2 = kve(nu - 2.0, zs), kve(nu + 2.0, zs)
        d1 = -0.5 * (km1 + kp1) / k0
        d2 = 0.25 * (km2 + 2.0 * k0 + kp2) / k0
        if np.any(large):
            zt = np.where(large, z, 1.0)
            h = -1.0 - 0.5 / zt + (4.0 * nu * nu - 1.0) / (8.0 * zt * zt)
            hp = 0.5 / zt ** 2
            d1 = np.where(large, h, d1)
            d2 = np.where(large, hp + h * h, d2)
        return d1, d2

    def _psi(self, t, dim):
        z = np.sqrt(2.0 * t)
        d1, _ = self._kv_ratios(z, dim)
        return d1 / z - 0.25 * (dim - 2) / t

    def _psi_prime(self, t, dim):
        z = np.sqrt(2.0 * t)
        d1, d2 = self._kv_ratios(z, dim)
        h = d1  # (log K)' = K'/K
        h_prime = d2 - d1 ** 2
        # psi = h(z)/z - (M-2)/(4t); d/dt = (1/z) d/dz
        return (h_prime / z - h / z ** 2) / z + 0.25 * (dim - 2) / t ** 2


GENERATORS: dict[str, DensityGenerator] = {
    g.name: g
    for g in (Gaussian(), Cauchy(), GeneralizedGaussian15(), Logistic(),
              Laplace(), Weibull09(), Weibull11(), Gamma11())
}

FAMILY_NAMES = tuple(GENERATORS)


def get_generator(name: str) -> DensityGenerator:
    """Look up a family by its spec string (e.g. "gaussian", "weib0.9")."""
    try:
        return GENERATORS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown family {name!r}; choose from {sorted(GENERATORS)}") from None
