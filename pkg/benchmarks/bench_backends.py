"""Time the pure-Python and compiled Bellman kernels on the same problems.

    python3 benchmarks/bench_backends.py --grids 10 20 30 --repeats 3

Each grid size solves the ``fig1`` preset (prior plus innovation) with the
grid shrunk to ``g x g``.  The best wall time over the repeats is reported,
and the two backends' tables are checked for bitwise equality.
"""

import argparse
import sys
import time

import numpy as np

from testsched import config
from testsched.kernel import available_backends
from testsched.solver import solve_problem


def best_time(spec, backend, repeats, workers):
    best, sol = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        sol = solve_problem(spec, backend=backend, workers=workers)
        best = min(best, time.perf_counter() - t0)
    return best, sol


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--preset", default="fig1")
    ap.add_argument("--grids", type=int, nargs="+", default=[10, 20, 30])
    ap.add_argument("--horizon", type=int, default=None, help="override the preset horizon")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1, help="threads for the compiled kernel")
    args = ap.parse_args(argv)

    if "compiled" not in available_backends():
        print("compiled extension is not built; nothing to compare", file=sys.stderr)
        return 1

    base = config.load_preset(args.preset)
    print(f"{'grid':>6} {'states':>8} {'python s':>10} {'compiled s':>11} {'speedup':>8}  identical")
    for g in args.grids:
        patch = {"grid": {"k_max": g, "n_max": g}}
        if args.horizon:
            patch["horizon"] = args.horizon
        spec = config.to_spec(config.merge(base, patch))
        tp, sp = best_time(spec, "python", args.repeats, 1)
        tc, sc = best_time(spec, "compiled", args.repeats, args.workers)
        same = (np.array_equal(sp.utility.values, sc.utility.values)
                and np.array_equal(sp.policy.values, sc.policy.values))
        print(f"{g:>6} {sp.stats['states']:>8} {tp:>10.3f} {tc:>11.3f} {tp / tc:>7.1f}x  {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
