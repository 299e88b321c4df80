"""Benchmark the compiled tracing kernels against the pure-numpy
fallback.

Runs both backends on identical workloads (line chords across a pixel
grid; circular-arc tracing), checks that the results agree, and prints
wall-clock timings plus the speedup.

Usage: python benchmarks/bench_kernels.py [--n 400] [--repeat 3]
"""

import argparse
import math
import time

import numpy as np

from jointct.kernels import _pure

try:
    from jointct.kernels import _core
except ImportError:
    _core = None


GRID = dict(x1_min=-2.0, x2_min=-3.0, dx1=4.0 / 200, dx2=4.0 / 200,
            n1=200, n2=200)


def line_workload(n, seed=0):
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(n):
        ang = rng.uniform(0, math.pi)
        d = (math.cos(ang), math.sin(ang))
        p = (rng.uniform(-3, 3), rng.uniform(-4, 2))
        jobs.append((p[0], p[1], d[0], d[1]))
    return jobs


def arc_workload(n, seed=1):
    rng = np.random.default_rng(seed)
    jobs = []
    max_step = 0.25 * min(GRID["dx1"], GRID["dx2"])
    for _ in range(n):
        r = rng.uniform(1.5, 9.0)
        cx = rng.uniform(-4, 4)
        phi0 = rng.uniform(math.pi, 1.4 * math.pi)
        phi1 = phi0 + rng.uniform(0.2, math.pi / 2)
        jobs.append((cx, 2.0, r, phi0, phi1, max_step))
    return jobs


def run(backend, fn_name, jobs):
    fn = getattr(backend, fn_name)
    out = []
    t0 = time.perf_counter()
    for job in jobs:
        out.append(fn(*job, **GRID))
    return time.perf_counter() - t0, out


def compare(a, b):
    worst = 0.0
    for (ia, wa), (ib, wb) in zip(a, b):
        da = dict(zip(ia.tolist(), wa.tolist()))
        db = dict(zip(ib.tolist(), wb.tolist()))
        keys = set(da) | set(db)
        for k in keys:
            worst = max(worst, abs(da.get(k, 0.0) - db.get(k, 0.0)))
    return worst


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=400, help="rows per workload")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if _core is None:
        print("compiled backend unavailable; nothing to compare")
        return 1

    for fn_name, jobs in (("line_chords", line_workload(args.n)),
                          ("trace_arc", arc_workload(args.n))):
        t_pure = min(run(_pure, fn_name, jobs)[0] for _ in range(args.repeat))
        t_core = min(run(_core, fn_name, jobs)[0] for _ in range(args.repeat))
        _, out_pure = run(_pure, fn_name, jobs)
        _, out_core = run(_core, fn_name, jobs)
        gap = compare(out_pure, out_core)
        print(f"{fn_name:12s} rows={args.n:5d} pure={t_pure * 1e3:8.1f} ms "
              f"compiled={t_core * 1e3:8.1f} ms "
              f"speedup={t_pure / t_core:6.1f}x max|dw|={gap:.2e}")
        if gap > 1e-9:
            print("  WARNING: backends disagree beyond 1e-9")
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
