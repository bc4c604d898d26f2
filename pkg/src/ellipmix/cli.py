"""Command-line interface: fit, benchmark, gen, sample, ifcurve, check.

Exit codes: 0 success, 1 usage error, 2 operational failure (optimization
failed or a check did not pass; reports are still written in that case).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .datagen import (SyntheticSpec, add_uniform_noise, hennig_1d, make_flower,
                      make_synthetic, read_csv, replace_with_cauchy, write_csv)
from .generators import FAMILY_NAMES
from .mixture import Dataset, params_from_json
from .robustness import if_curve
from .solvers import (SOLVERS, FitOptions, benchmark, expand_family_spec,
                      initialize)

USAGE_ERROR, FAILURE = 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _write_text(out, text):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _dump_rows_csv(rows):
    if not rows:
        return ""
    cols = list(rows[0])
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(
            format(row[c], ".17g") if isinstance(row[c], float) else str(row[c])
            for c in cols))
    return "\n".join(lines) + "\n"


def _parse_grid(spec):
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ValueError(f"bad grid spec {spec!r}, expected start:stop:step")
    n = int(round((stop - start) / step)) + 1
    return start + step * np.arange(n)


def _fit_options(args):
    prior = None
    if getattr(args, "reg_s", "identity") != "identity":
        data, _ = read_csv(args.reg_s)
        prior = data.x
    return FitOptions(
        max_iterations=args.max_iter, tol=args.tol, seed=args.seed,
        reg_v=args.reg_v, reg_prior=prior)


def cmd_fit(args):
    data, _labels = read_csv(args.data)
    if args.k < 1:
        raise ValueError("--k must be >= 1")
    fams = expand_family_spec(args.family, args.k)
    opts = _fit_options(args)
    init = initialize(data, args.k, fams, scheme=args.init,
                      rng=np.random.default_rng(args.seed))
    report = SOLVERS[args.solver](init, data, opts)
    _write_text(args.out, json.dumps(report.to_json(), indent=2) + "\n")
    return FAILURE if report.failed else 0


def cmd_benchmark(args):
    spec = SyntheticSpec(dim=args.m, k=args.k, n=args.n,
                         separation=args.c, eccentricity=args.e,
                         seed=args.seed)
    opts = FitOptions(max_iterations=args.max_iter, tol=args.tol,
                      seed=args.seed)
    rows, _details = benchmark(spec, args.families.split(","),
                               args.solvers.split(","), args.restarts, opts)
    if args.format == "json":
        _write_text(args.out, json.dumps(rows, indent=2) + "\n")
    else:
        _write_text(args.out, _dump_rows_csv(rows))
    return 0


def cmd_gen(args):
    if args.kind == "synthetic":
        spec = SyntheticSpec(dim=args.m, k=args.k, n=args.n, separation=args.c,
                             eccentricity=args.e, families=args.family,
                             seed=args.seed)
        data, (truth, labels) = make_synthetic(spec)
    elif args.kind == "flower":
        data, (truth, labels) = make_flower(args.n, seed=args.seed)
    elif args.kind == "hennig":
        data, labels = hennig_1d(args.n_per_cluster, args.sigma)
        truth = None
    else:
        raise ValueError(f"unknown dataset kind {args.kind!r}")
    if args.cauchy and truth is not None:
        idx = [int(v) for v in args.cauchy.split(",")]
        data, (truth, labels) = replace_with_cauchy(
            data, (truth, labels), labels, idx, seed=args.seed + 1)
    if args.noise > 0:
        box = ((args.noise_box[0], args.noise_box[1]),)
        data, labels = add_uniform_noise(data, labels, args.noise, box=box,
                                         seed=args.seed + 2)
    if args.out:
        write_csv(args.out, data, labels, header=args.header)
    else:
        write_csv(sys.stdout, data, labels, header=args.header)
    return 0


def cmd_sample(args):
    with open(args.model) as f:
        doc = json.load(f)
    if "model" in doc and isinstance(doc["model"], dict):
        doc = doc["model"]
    params = params_from_json(doc)
    x, labels = params.sample(args.n, np.random.default_rng(args.seed))
    data = Dataset(x)
    if args.out:
        write_csv(args.out, data, labels, header=args.header)
    else:
        write_csv(sys.stdout, data, labels, header=args.header)
    return 0


def cmd_ifcurve(args):
    grid = _parse_grid(args.grid)
    res = if_curve(args.family, grid, eps=args.eps,
                   n_per_cluster=args.n_per_cluster, sigma=args.sigma,
                   seed=args.seed, with_empirical=not args.no_empirical)
    if args.out:
        res.to_csv(args.out)
    else:
        res.to_csv(sys.stdout)
    return 0


def cmd_check(args):
    from .checks import run_all

    ok = run_all(verbose=True, seed=args.seed)
    return 0 if ok else FAILURE


def build_parser():
    p = _Parser(prog="ellipmix",
                description="elliptical mixture models: estimation, "
                            "benchmarking, data generation, influence curves")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="estimate a mixture from CSV data")
    f.add_argument("--data", required=True)
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--family", default="gaussian",
                   help="one family or a comma list of k (or 'mix')")
    f.add_argument("--solver", choices=sorted(SOLVERS), default="our")
    f.add_argument("--reg-v", type=float, default=0.0)
    f.add_argument("--reg-s", default="identity",
                   help="'identity' or a CSV file with the prior matrix")
    f.add_argument("--init", choices=("random", "kmeans++"), default="random")
    f.add_argument("--max-iter", type=int, default=1000)
    f.add_argument("--tol", type=float, default=1e-10)
    _add_common(f)
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("benchmark", help="repeated fits on synthetic data")
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--n", type=int, default=10000)
    b.add_argument("--c", type=float, default=10.0)
    b.add_argument("--e", type=float, default=10.0)
    b.add_argument("--families", default="gaussian",
                   help="comma list; entries may be 'mix'")
    b.add_argument("--solvers", default="our,ira,rmo")
    b.add_argument("--restarts", type=int, default=10)
    b.add_argument("--max-iter", type=int, default=1000)
    b.add_argument("--tol", type=float, default=1e-10)
    _add_common(b)
    b.set_defaults(func=cmd_benchmark)

    g = sub.add_parser("gen", help="generate datasets as CSV")
    g.add_argument("kind", choices=("synthetic", "flower", "hennig"))
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--k", type=int, default=4)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--c", type=float, default=10.0)
    g.add_argument("--e", type=float, default=10.0)
    g.add_argument("--family", default="gaussian")
    g.add_argument("--noise", type=float, default=0.0,
                   help="append this fraction of uniform noise rows")
    g.add_argument("--noise-box", type=float, nargs=2, default=(-15.0, 15.0))
    g.add_argument("--cauchy", default="",
                   help="comma list of component indices to replace")
    g.add_argument("--n-per-cluster", type=int, default=300)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--header", action="store_true")
    _add_common(g)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sample", help="draw rows from a model JSON")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--header", action="store_true")
    _add_common(s)
    s.set_defaults(func=cmd_sample)

    i = sub.add_parser("ifcurve", help="influence-function curves as CSV")
    i.add_argument("--family", required=True, choices=FAMILY_NAMES)
    i.add_argument("--grid", default="-20:20:0.5", help="start:stop:step")
    i.add_argument("--eps", type=float, default=5e-3)
    i.add_argument("--n-per-cluster", type=int, default=300)
    i.add_argument("--sigma", type=float, default=1.0)
    i.add_argument("--no-empirical", action="store_true",
                   help="skip the refit-based curves (much faster)")
    _add_common(i)
    i.set_defaults(func=cmd_ifcurve)

    c = sub.add_parser("check", help="run the numeric self-checks")
    _add_common(c)
    c.set_defaults(func=cmd_check)
    return p


def _mend_argv(argv):
    """Merge flag values that start with '-' (e.g. --grid -20:20:0.5)."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--grid" and i + 1 < len(argv) \
                and argv[i + 1].startswith("-") and ":" in argv[i + 1]:
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = _mend_argv(sys.argv[1:] if argv is None else list(argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"ellipmix: error: {exc}\n")
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
