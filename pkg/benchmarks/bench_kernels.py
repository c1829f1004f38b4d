#!/usr/bin/env python3
"""Benchmark the compiled sampling kernels against the numpy fallback.

Covers the isolated kernel calls and an end-to-end mobility workload.
Run from the repo root after building the extension:

    python3 setup.py build_ext --inplace
    python3 benchmarks/bench_kernels.py
"""
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from crimesim.kernels import _python

try:
    from crimesim.kernels import _native
except ImportError:
    _native = None

N_CELLS = 1000
N_CALLS = 20_000


def bench_kernel(impl, rows, excludes, us):
    t0 = time.perf_counter()
    for row, exc, u in zip(rows, excludes, us):
        impl.masked_weighted_pick(row, exc, u)
    masked = time.perf_counter() - t0
    t0 = time.perf_counter()
    for row, u in zip(rows, us):
        impl.weighted_pick(row, u)
    plain = time.perf_counter() - t0
    return plain, masked


def bench_mobility(backend_label, funcs):
    import crimesim.mobility as mobility
    from crimesim.mobility import EprParams, epr_step
    from crimesim.population import AgentState
    from crimesim.seeding import substream
    from crimesim.synth import synthetic_city

    saved = (mobility.weighted_pick, mobility.masked_weighted_pick)
    mobility.weighted_pick, mobility.masked_weighted_pick = funcs
    try:
        env = synthetic_city(N_CELLS, seed=3, adjacency=False)
        env.inv_sq_distance()  # build the kernel matrix outside the timing
        params = EprParams()
        rng = substream(1, "bench")
        states = [AgentState(location=env.cell_ids[i], visit_counts={env.cell_ids[i]: 1})
                  for i in range(0, N_CELLS, 10)]
        t0 = time.perf_counter()
        for _ in range(200):
            for state in states:
                epr_step(state, env, params, rng)
        elapsed = time.perf_counter() - t0
        n_steps = 200 * len(states)
        print(f"  epr mobility [{backend_label}]: {n_steps} agent-steps "
              f"in {elapsed:.3f}s ({elapsed / n_steps * 1e6:.1f} us/step)")
        return elapsed
    finally:
        mobility.weighted_pick, mobility.masked_weighted_pick = saved


def main():
    rng = np.random.default_rng(0)
    rows = [rng.random(N_CELLS) for _ in range(N_CALLS)]
    excludes = [rng.choice(N_CELLS, size=int(rng.integers(1, 60)),
                           replace=False).astype(np.int64) for _ in range(N_CALLS)]
    us = rng.random(N_CALLS)

    print(f"kernel micro-benchmark: {N_CALLS} calls over {N_CELLS}-cell vectors")
    py_plain, py_masked = bench_kernel(_python, rows, excludes, us)
    print(f"  python   weighted_pick {py_plain:.3f}s   masked {py_masked:.3f}s")
    if _native is None:
        print("  native   (extension not built; run setup.py build_ext --inplace)")
    else:
        na_plain, na_masked = bench_kernel(_native, rows, excludes, us)
        print(f"  native   weighted_pick {na_plain:.3f}s   masked {na_masked:.3f}s")
        print(f"  speedup  weighted_pick x{py_plain / na_plain:.1f}   "
              f"masked x{py_masked / na_masked:.1f}")
        mism = sum(
            _python.masked_weighted_pick(r, e, u) != _native.masked_weighted_pick(r, e, u)
            for r, e, u in zip(rows[:2000], excludes[:2000], us[:2000]))
        print(f"  agreement check: {mism} mismatches in 2000 draws")

    print("end-to-end mobility workload")
    py_t = bench_mobility("python", (_python.weighted_pick, _python.masked_weighted_pick))
    if _native is not None:
        na_t = bench_mobility("native", (_native.weighted_pick, _native.masked_weighted_pick))
        print(f"  mobility speedup x{py_t / na_t:.2f}")


if __name__ == "__main__":
    main()
