"""Compiled vs pure-Python kernels for the pointwise box supremum.

    python benchmarks/bench_kernels.py [--points 2000] [--repeat 3]

Both backends receive identical inputs; the script checks that their
values agree before reporting timings.
"""

import argparse
import time

import numpy as np

from pbcover import _fallback

try:
    from pbcover import _core
except ImportError:  # extension not built
    _core = None

MODES = {"enum": _fallback.MODE_ENUM, "zonotope": _fallback.MODE_ZONOTOPE,
         "heuristic": _fallback.MODE_HEURISTIC}


def case(npts, m, seed):
    rng = np.random.default_rng(seed)
    U = np.ascontiguousarray(rng.normal(size=(npts, m)))
    V = np.ascontiguousarray(rng.normal(size=(npts, m)))
    order = np.arange(npts, dtype=np.int64)
    bounds = np.full(npts, np.inf)  # no pruning: every point is evaluated
    return U, V, order, bounds


def timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled core unavailable; build with `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'mode':<10}{'m':>4}{'points':>8}{'python s':>12}{'cython s':>12}{'speedup':>10}  agree")
    for mode, m in [("enum", 4), ("enum", 8), ("enum", 12), ("zonotope", 8), ("zonotope", 32),
                    ("zonotope", 128), ("heuristic", 12), ("heuristic", 32)]:
        npts = args.points if m <= 32 else max(50, args.points // 10)
        if mode == "enum" and m == 12:
            npts = max(20, args.points // 50)
        U, V, order, bounds = case(npts, m, seed=m)
        call = (U, V, order, bounds, MODES[mode], 16, 8, 0)
        tp, rp = timed(lambda: _fallback.field_max(*call), args.repeat)
        tc, rc = timed(lambda: _core.field_max(*call), args.repeat)
        agree = abs(rp[0] - rc[0]) <= 1e-9 * max(1.0, abs(rp[0]))
        print(f"{mode:<10}{m:>4}{npts:>8}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
