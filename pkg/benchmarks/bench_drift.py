"""Throughput of the pairwise drift: compiled loop vs numpy fallback.

Run:  python benchmarks/bench_drift.py [--sizes 500,1000,2000,4000]

Reports pair-interactions per second for both engines and the speedup,
plus a projection of the largest acceptance sweep onto each engine.
The two engines must agree to float round-off; the benchmark asserts it.
"""

import argparse
import time

import numpy as np

from mollsim.bumps import MollifierParams
from mollsim.engine import (HAVE_COMPILED, pair_sum_compiled,
                            pair_sum_python)
from mollsim.kernels import BoundedLipschitzDemo, KellerSegel
from mollsim.tabulate import get_tabulated_kernel

# pair ops of the heaviest shipped config (tagged-particle marginal study)
HEAVIEST_SWEEP_OPS = 9.9e11


def time_engine(fn, x, tab, min_seconds=0.3):
    fn(x, tab)  # warm up (jit caches, table touch)
    reps, elapsed = 0, 0.0
    t0 = time.perf_counter()
    while elapsed < min_seconds:
        fn(x, tab)
        reps += 1
        elapsed = time.perf_counter() - t0
    return elapsed / reps


def bench(d, N, rng):
    spec = BoundedLipschitzDemo(d=1) if d == 1 else KellerSegel(d=2, chi=0.5)
    m = MollifierParams(d=d, alpha=1.0 / 3.0 if d == 1 else 1.0 / 6.0, N=N)
    tab = get_tabulated_kernel(spec, m)
    x = rng.normal(size=(N, d))
    t_py = time_engine(pair_sum_python, x, tab)
    row = {"d": d, "N": N, "pairs": N * N,
           "python_s": t_py, "python_rate": N * N / t_py}
    if HAVE_COMPILED:
        t_c = time_engine(pair_sum_compiled, x, tab)
        gap = np.max(np.abs(pair_sum_compiled(x, tab)
                            - pair_sum_python(x, tab)))
        scale = max(1.0, float(np.max(np.abs(pair_sum_python(x, tab)))))
        assert gap <= 1e-10 * scale, \
            "engines disagree: max gap %.3g" % gap
        row.update({"compiled_s": t_c, "compiled_rate": N * N / t_c,
                    "speedup": t_py / t_c, "max_gap": gap})
    return row


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="500,1000,2000,4000")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    print("engine available: %s" % ("compiled + fallback" if HAVE_COMPILED
                                    else "fallback only"))
    print("%-3s %-7s %-14s %-14s %-9s %s"
          % ("d", "N", "python pair/s", "compiled pair/s", "speedup",
             "max gap"))
    best = {}
    for d in (1, 2):
        for N in sizes:
            row = bench(d, N, rng)
            best[d] = max(best.get(d, 0.0), row.get("compiled_rate",
                                                    row["python_rate"]))
            crate = "%.4g" % row["compiled_rate"] if HAVE_COMPILED else "-"
            speed = "%.2fx" % row["speedup"] if HAVE_COMPILED else "-"
            gap = "%.2e" % row["max_gap"] if HAVE_COMPILED else "-"
            print("%-3d %-7d %-14.4g %-15s %-9s %s"
                  % (row["d"], row["N"], row["python_rate"], crate,
                     speed, gap))

    rate = best[1]
    print()
    print("heaviest shipped config needs ~%.3g pair ops;" % HEAVIEST_SWEEP_OPS)
    print("at the measured d=1 rate that is ~%.0f s on this machine"
          % (HEAVIEST_SWEEP_OPS / rate))
    if HAVE_COMPILED:
        print("the fallback alone would take roughly the speedup factor "
              "longer; budget accordingly before forcing force_python")


if __name__ == "__main__":
    main()
