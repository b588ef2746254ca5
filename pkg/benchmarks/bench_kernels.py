"""Time each hot kernel's numba and numpy forms on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` wall time of each path
and the speedup. Also reports an end-to-end OFW round on a 100x120 trace-norm
ball under whichever path the environment selects (set ONLINEFW_NO_NUMBA=1 to
force numpy).
"""

import argparse
import time

import numpy as np

from onlinefw import kernels
from onlinefw.oracles import random_flow_polytope


def _best(fn, args, repeat):
    fn(*args)  # compile / warm caches
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def cases(rng):
    flow = random_flow_polytope(60, edge_prob=0.3, seed=1)
    yield "dag_shortest_path", (
        flow._order, flow._indptr, flow._heads, flow._eids,
        rng.standard_normal(len(flow.edges)), flow.source,
    )

    nnz, m, n = 5000, 100, 120
    rows = rng.integers(0, m, nnz)
    cols = rng.integers(0, n, nnz)
    yield "coo_power_iteration", (rows, cols, rng.standard_normal(nnz), m, n,
                                  rng.standard_normal(n), 1e-5, 2000)

    yield "mix_entry_cache", (np.zeros(nnz), rows, cols, 0.3, -2.0,
                              rng.standard_normal(m), rng.standard_normal(n))

    dim, t = 5, 5000
    yield "smoothed_abs_sums", (rng.uniform(-1, 1, dim), rng.uniform(-1, 1, (t, dim)),
                                rng.uniform(0.1, 1.0, t), dim)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"numba enabled: {kernels.NUMBA_ENABLED}")
    print(f"{'kernel':<22}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, kargs in cases(rng):
        jit, ref = kernels.IMPLEMENTATIONS[name]
        tj = _best(jit, kargs, args.repeat) if kernels.NUMBA_ENABLED else float("nan")
        tn = _best(ref, kargs, args.repeat)
        print(f"{name:<22}{tj * 1e3:>12.3f}{tn * 1e3:>12.3f}{tn / tj:>10.1f}")

    from onlinefw.cfbench import BenchConfig, planted_records, run_cf_compare
    recs, tau = planted_records(100, 120, 5, 2000, seed=0)
    res = run_cf_compare(BenchConfig(100, 120, tau, 2000, algorithms="both"), recs)
    s = res.summary
    print(f"cf round (T=2000): ofw {s['ofw_mean_round_ns'] / 1e6:.3f} ms, "
          f"ogd {s['ogd_mean_round_ns'] / 1e6:.3f} ms")


if __name__ == "__main__":
    main()
