#!/usr/bin/env python3
"""Numba vs pure-numpy timings for the two hot kernels.

Kernels: finite-difference matrix assembly and the Green-function matrix.
Each kernel is run once to warm up (JIT compile), then timed ``--runs``
times on each path; the median is reported along with the max abs
difference between the two results.

    python3 benchmarks/bench_kernels.py [--runs 5] [--json]
"""
import argparse
import json
import os
import statistics
import time

import numpy as np

from fracrecon.fraclap import FracOrder, assemble_fd_matrix
from fracrecon.greens import BallSpec, green_matrix
from fracrecon.grid import make_grid

FLAG = "FRACRECON_DISABLE_NUMBA"


def timed(fn, runs):
    fn()  # warm-up; compiles on the numba path
    times = []
    for _ in range(runs):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times), out


def both_paths(fn, runs):
    os.environ.pop(FLAG, None)
    t_nb, a = timed(fn, runs)
    os.environ[FLAG] = "1"
    try:
        t_np, b = timed(fn, runs)
    finally:
        os.environ.pop(FLAG, None)
    return t_nb, t_np, float(np.max(np.abs(a - b)))


def cases():
    for N in (500, 1000, 2000):
        g = make_grid(-5, 5, N)
        yield f"fd_matrix N={N}", lambda g=g: assemble_fd_matrix(g, FracOrder(0.3)).matrix
    for n in (41, 81, 161):
        ball = BallSpec(1.0, FracOrder(0.3))
        x = make_grid(-1, 1, n).nodes[1:-1]
        z = make_grid(-1, 1, 2 * n + 1).nodes
        yield f"green_matrix {x.size}x{z.size}", lambda x=x, z=z, b=ball: green_matrix(x, z, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print JSON instead of a table")
    args = ap.parse_args()

    rows = []
    for name, fn in cases():
        t_nb, t_np, diff = both_paths(fn, args.runs)
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np,
                     "speedup": t_np / t_nb, "max_abs_diff": diff})
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'kernel':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max diff':>12}")
    for r in rows:
        print(f"{r['kernel']:<26}{r['numba_s']:>12.4f}{r['numpy_s']:>12.4f}"
              f"{r['speedup']:>10.1f}{r['max_abs_diff']:>12.2e}")


if __name__ == "__main__":
    main()
