#!/usr/bin/env python3
"""Compare the compiled kernel backend against the numpy fallback.

Times the three hot operations at realistic sizes, then a full planner run
on a mid-size table.  Run after `pip install -e . --no-build-isolation`:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from assayplan import _kernels_py

try:
    from assayplan import _kernels_cy
except ImportError:
    _kernels_cy = None


def time_op(fn, *args, repeat=20000):
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - start) / repeat


def bench_kernels(n=220, k=6):
    rng = np.random.default_rng(0)
    base = rng.uniform(0, 4, n)
    matrix = np.ascontiguousarray(rng.normal(0, 2, (k, n)))
    rows = np.array([0, 3], dtype=np.int64)
    coefs = np.array([1.3, 0.8])
    values = np.array([0.5, -0.2])
    g_idx = np.arange(n, dtype=np.int64)
    g_vals = rng.normal(0, 1, n)
    g_in = (rng.random(n) < 0.5).astype(np.float64)

    backends = [("python", _kernels_py)]
    if _kernels_cy is not None:
        backends.append(("cython", _kernels_cy))

    print(f"kernel micro-benchmarks (N={n}, batch=2)")
    for name, mod in backends:
        t_acc = time_op(mod.distance_accumulate, base, matrix, rows, coefs, values)
        t_w = time_op(mod.weights_from_distances, base, 1.0)
        t_s = time_op(mod.target_stats, base, 1.0, g_idx, g_vals, g_in)
        t_i = time_op(mod.sample_index, base, 1.0, 0.37)
        print(
            f"  {name:7s} accumulate {t_acc * 1e6:7.2f} us | "
            f"weights {t_w * 1e6:7.2f} us | stats {t_s * 1e6:7.2f} us | "
            f"sample {t_i * 1e6:7.2f} us"
        )


def bench_planner():
    import os

    from assayplan.belief import CandidateState, KernelConfig
    from assayplan.env import RewardConfig
    from assayplan.planner import PlannerParams, plan
    from assayplan.synthetic import SyntheticSpec, generate_dataset
    from assayplan import kernels

    sample = generate_dataset(SyntheticSpec.standard(), np.random.default_rng(0))
    root = CandidateState(known_features={})
    config = RewardConfig(mode="info_per_cost", rho=(1.0,), epsilon=0.0,
                          tau=0.0, horizon=6)
    params = PlannerParams(n_itr=2000, seed=1, max_batch=6)
    start = time.perf_counter()
    plan(root, sample.dataset, KernelConfig(), config, params)
    elapsed = time.perf_counter() - start
    print(
        f"planner ({kernels.BACKEND} backend): {params.n_itr} iterations on "
        f"N=200 in {elapsed:.2f} s "
        f"({elapsed / params.n_itr * 1e6:.0f} us/iteration)"
    )
    if kernels.BACKEND == "cython":
        print("re-run with ASSAYPLAN_FORCE_PY=1 to time the fallback")


if __name__ == "__main__":
    bench_kernels()
    bench_planner()
