#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-NumPy fallback.

Runs each workload twice, in subprocesses with CSSP_LAB_BACKEND forced to
"numba" and "numpy", and prints a speedup table. The first numba run inside
each subprocess pays JIT compilation; a warm-up call keeps it out of the
timings.
"""

import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, sys, time
import numpy as np

from cssp_lab import backend
from cssp_lab.protocol import SimConfig, run_simulation
from cssp_lab.detection import (
    ScoreSeries, correlation_test, distribution_test, envelope_test,
)

def timeit(fn, warm=True, repeat=1):
    if warm:
        fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best

results = {"backend": backend.active_backend()}

sim_rounds = 200_000 if backend.HAS_NUMBA else 20_000
cfg = SimConfig(alpha=0.3, beta=1.0, rounds=sim_rounds,
                strategy="one-lookahead", master_seed=5)
results["simulate_lookahead"] = (
    timeit(lambda: run_simulation(cfg)) / sim_rounds
)

trace = run_simulation(SimConfig(
    alpha=0.3, beta=1.0, rounds=100_000, strategy="one-lookahead",
    master_seed=6))
series = ScoreSeries.from_trace(trace)

from cssp_lab.detection import lilliefors_null_statistics
seed_box = [0]
def fresh_null():
    seed_box[0] += 1
    lilliefors_null_statistics(100_000, 100, seed_box[0])
results["bootstrap_null_100x1e5"] = timeit(fresh_null)
results["correlation_test_1e5"] = timeit(
    lambda: correlation_test(series, permutations=1000, seed=1)
)
results["envelope_test_1e5"] = timeit(
    lambda: envelope_test(series, delta=0.05)
)
print(json.dumps(results))
"""


def run_backend(name: str) -> dict:
    env = dict(os.environ, CSSP_LAB_BACKEND=name)
    out = subprocess.run(
        [sys.executable, "-c", WORKER], env=env, capture_output=True, text=True
    )
    if out.returncode != 0:
        raise SystemExit(f"{name} worker failed:\n{out.stderr}")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    numba_res = run_backend("numba")
    numpy_res = run_backend("numpy")
    print(f"{'workload':<28} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    print("-" * 64)
    rows = [
        ("simulate (per round)", "simulate_lookahead", 1e6, "us"),
        ("bootstrap null 100x1e5", "bootstrap_null_100x1e5", 1.0, "s"),
        ("correlation test @1e5", "correlation_test_1e5", 1.0, "s"),
        ("envelope test @1e5", "envelope_test_1e5", 1.0, "s"),
    ]
    for label, key, scale, unit in rows:
        a, b = numba_res[key] * scale, numpy_res[key] * scale
        print(f"{label:<28} {a:>9.3f} {unit:<2} {b:>9.3f} {unit:<2} {b / a:>8.1f}x")


if __name__ == "__main__":
    main()
