"""Influence functions: how much one outlier moves the fitted parameters.

Builds the deterministic three-cluster 1-D sample, fits gaussian and cauchy
mixtures, and walks an outlier across [-20, 20], comparing the closed-form
influence values against actual contaminated refits.  Writes CSV curves
next to this script.

Run:  python demos/04_influence_functions.py        (~2 minutes)
"""

import pathlib

import numpy as np

from ellipmix import classify_boundedness, if_curve

here = pathlib.Path(__file__).resolve().parent
grid = np.arange(-20.0, 20.0 + 0.25, 0.5)

for family in ("gaussian", "cauchy"):
    res = if_curve(family, grid, eps=5e-3, n_per_cluster=150)
    out = here / f"if_curve_{family}.csv"
    res.to_csv(str(out))
    w1, w2, w3 = res.constants
    mean_bounded = classify_boundedness(grid, res.if_mean_theory)
    cov_bounded = classify_boundedness(grid, res.if_cov_theory)
    # compare on |x0| <= 5; far outside, a finite-eps refit of a non-robust
    # family can jump basins (a whole component chases the outlier), which
    # is the instability the influence analysis warns about
    inner = np.abs(grid) <= 5.0
    agree = np.nanmax(np.abs(res.if_mean_empirical
                             - res.if_mean_theory)[inner])
    print(f"{family:9s} w=({w1:.3f}, {w2:.3f}, {w3:.3f}) "
          f"mean-IF bounded={mean_bounded} scatter-IF bounded={cov_bounded} "
          f"max |refit - theory| on |x0|<=5 = {agree:.3f}")
    print(f"          wrote {out.name}")

print("\nthe gaussian influence grows linearly without bound; the cauchy")
print("influence plateaus: a far outlier simply stops mattering.")
