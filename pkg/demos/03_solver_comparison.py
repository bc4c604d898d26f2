"""The three estimation routes on one synthetic benchmark.

Compares the reformulated manifold solver ("our"), the fixed-point
reweighting iteration ("ira") and the direct manifold baseline ("rmo") on a
seeded synthetic mixture: iterations, wall time, final cost, failure rate.

Run:  python demos/03_solver_comparison.py          (a few minutes)
"""

from ellipmix import FitOptions, SyntheticSpec, benchmark

spec = SyntheticSpec(dim=4, k=4, n=4000, separation=10, eccentricity=10,
                     seed=11)
rows, _ = benchmark(spec, ["gaussian", "cauchy", "weib1.1"],
                    ["our", "ira", "rmo"], restarts=5,
                    opts=FitOptions(max_iterations=500))

print(f"{'family':>9s} {'solver':>6s} {'iters':>8s} {'seconds':>8s} "
      f"{'cost/N*100':>11s} {'fail':>5s}")
for r in rows:
    print(f"{r['family']:>9s} {r['solver']:>6s} "
          f"{r['iterations_mean']:8.1f} {r['seconds_mean']:8.2f} "
          f"{r['cost_per_sample_x100']:11.2f} {r['fail_ratio']:5.0%}")

print("\nthe reweighting iteration is unbeatable when it works, but only the")
print("manifold routes handle every family; the reformulated one needs far")
print("fewer iterations than the direct baseline.")
