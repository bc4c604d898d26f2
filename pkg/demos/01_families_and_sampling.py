"""Tour of the radial families: shapes, tails, normalizers, sampling.

Run:  python demos/01_families_and_sampling.py
"""

import numpy as np

from ellipmix import EllipticalComponent, FAMILY_NAMES, get_generator

rng = np.random.default_rng(0)

print("log-density profiles (M = 2, t = squared Mahalanobis distance)")
t = np.array([0.1, 1.0, 4.0, 16.0, 64.0])
print(f"{'family':>9s} " + " ".join(f"{v:>8.1f}" for v in t))
for name in FAMILY_NAMES:
    g = get_generator(name)
    vals = g.log_g(t, 2) + g.log_normalizer(2)
    print(f"{name:>9s} " + " ".join(f"{v:>8.3f}" for v in vals))

print("\npsi(t) = (log g)'(t) decides robustness: psi*t bounded <=> the")
print("scatter ignores far outliers, psi*sqrt(t) bounded <=> the mean does.")
for name in FAMILY_NAMES:
    flags = get_generator(name).robustness_flags(2)
    print(f"{name:>9s}  scatter-robust={flags['covariance_robust']!s:5s} "
          f"mean-robust={flags['mean_robust']!s:5s} "
          f"heavy-tailed={flags['heavy_tailed']!s:5s}")

print("\nsampling through x = mu + R * Lambda * u (seeded, exact radial law)")
comp = EllipticalComponent(np.array([1.0, -1.0]),
                           np.array([[2.0, 0.6], [0.6, 1.0]]), "laplace")
x = comp.sample(50_000, rng)
print("sample mean       :", np.round(x.mean(axis=0), 3))
print("sample covariance :")
print(np.round(np.cov(x.T), 3))
print("(the scatter matrix is proportional, not equal, to the covariance)")
