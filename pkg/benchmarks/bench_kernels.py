"""Time the compiled simulation loop against its pure-Python twin.

Runs the Scenario A workload (100k steps) through both paths in one
process — `jit_loop()` compiles regardless of the env flag, and
`simulate_loop_py` is the uncompiled function — then reports wall times,
steps/second, speedup, and the worst trajectory deviation between the two.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--duration DAYS]
"""

from __future__ import annotations

import argparse
import dataclasses
import time

import numpy as np

import seirvac._kernels as kernels
from seirvac.simulate import scenario_config, simulate


def time_path(loop, cfg, repeats: int):
    kernels.simulate_loop = loop
    traj = simulate(cfg)  # warmup (and compile, for the jitted path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        traj = simulate(cfg)
        best = min(best, time.perf_counter() - t0)
    return best, traj.data


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--duration", type=float, default=1000.0)
    args = parser.parse_args()

    cfg = dataclasses.replace(scenario_config("A"), duration=args.duration)
    n_steps = cfg.n_steps

    original = kernels.simulate_loop
    try:
        t_jit, data_jit = time_path(kernels.jit_loop(), cfg, args.repeats)
        t_py, data_py = time_path(kernels.simulate_loop_py, cfg, args.repeats)
    finally:
        kernels.simulate_loop = original

    dev = float(np.max(np.abs(data_jit - data_py)))
    print(f"workload: scenario A, {n_steps} steps, best of {args.repeats}")
    print(f"numba    : {t_jit * 1e3:9.2f} ms   {n_steps / t_jit:12.0f} steps/s")
    print(f"python   : {t_py * 1e3:9.2f} ms   {n_steps / t_py:12.0f} steps/s")
    print(f"speedup  : {t_py / t_jit:9.1f}x")
    print(f"max |trajectory deviation| between paths: {dev}")


if __name__ == "__main__":
    main()
