"""Robustness on the four-petal toy data: noise and heavy-tailed clusters.

Fits mixtures with different component families to (a) the clean flower,
(b) the flower plus 100% uniform noise, (c) the flower with two clusters
replaced by Cauchy samples, and reports how far the recovered means end up
from the true (+-5, +-5) centers.

Run:  python demos/02_flower_robust_fits.py        (~1 minute)
"""

import numpy as np

from ellipmix import (FitOptions, add_uniform_noise, fit_our, initialize,
                      make_flower, replace_with_cauchy)

TRUE_MEANS = np.array([[5, 5], [5, -5], [-5, 5], [-5, -5]], float)


def mean_error(params):
    err = 0.0
    for target in TRUE_MEANS:
        err = max(err, min(np.linalg.norm(m - target) for m in params.means))
    return err


def best_of(data, family, restarts=3):
    best = None
    for s in range(restarts):
        init = initialize(data, 4, [family] * 4, scheme="random",
                          rng=np.random.default_rng(s))
        rep = fit_our(init, data, FitOptions(max_iterations=500))
        if not rep.failed and (best is None or rep.final_cost < best.final_cost):
            best = rep
    return best


data, (truth, labels) = make_flower(10_000, seed=0)
noisy, _ = add_uniform_noise(data, labels, 1.0, seed=1)
mixed, _ = replace_with_cauchy(data, (truth, labels), labels, [0, 1], seed=2)

cases = {"clean": data, "100% uniform noise": noisy, "cauchy clusters": mixed}
for case, d in cases.items():
    print(f"--- {case} (N = {d.n}, best of 3 restarts) ---")
    for family in ("gaussian", "cauchy", "laplace"):
        rep = best_of(d, family)
        status = "all restarts failed" if rep is None else \
            f"worst mean error {mean_error(rep.params):.2f} " \
            f"({rep.iterations} iterations)"
        print(f"  {family:9s} {status}")
print("\nheavy-tailed components shrug off the contamination that drags the")
print("gaussian means around; with cauchy clusters in the data, only the")
print("cauchy mixture models its own kind.")
