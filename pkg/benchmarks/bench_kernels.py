#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each kernel pair on identical pre-drawn inputs and prints a small
table of wall times and speedups.  The package-level path selection
(SUPERRES_PURE_NUMPY) does not matter here: both variants are imported
directly.

Usage:
    python benchmarks/bench_kernels.py [--shots N] [--steps N] [--repeat N]
"""

import argparse
import math
import time

import numpy as np

from superres import _kernels


def time_fn(fn, *args, repeat=5):
    best = math.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_count_transitions(shots, repeat):
    rng = np.random.default_rng(0)
    quads = rng.normal(size=(shots, 4))
    uniforms = rng.random(shots)
    coeffs = np.array([0.3, -0.2, 0.15, 0.4])
    args = (quads, uniforms, coeffs, 0.95, 0.01)
    t_np = time_fn(_kernels.count_transitions_numpy, *args, repeat=repeat)
    row = ["count_transitions", f"{t_np * 1e3:9.2f}"]
    if _kernels.count_transitions_numba is not None:
        _kernels.count_transitions_numba(*args)  # compile
        t_nb = time_fn(_kernels.count_transitions_numba, *args, repeat=repeat)
        assert _kernels.count_transitions_numba(*args) == _kernels.count_transitions_numpy(*args)
        row += [f"{t_nb * 1e3:9.2f}", f"{t_np / t_nb:7.2f}x"]
    else:
        row += ["        -", "      -"]
    return row


def bench_ou_phases(shots, steps, repeat):
    rng = np.random.default_rng(1)
    q0 = rng.normal(size=(shots, 4))
    noise = rng.normal(size=(steps, shots, 4))
    weights = rng.normal(size=steps + 1)
    tables = rng.normal(size=(steps + 1, 4))
    args = (q0, noise, 0.999, 0.01, weights, tables)
    t_np = time_fn(_kernels.ou_phases_numpy, *args, repeat=repeat)
    row = ["ou_phases", f"{t_np * 1e3:9.2f}"]
    if _kernels.ou_phases_numba is not None:
        _kernels.ou_phases_numba(*args)  # compile
        t_nb = time_fn(_kernels.ou_phases_numba, *args, repeat=repeat)
        np.testing.assert_allclose(
            _kernels.ou_phases_numba(*args), _kernels.ou_phases_numpy(*args), rtol=1e-12
        )
        row += [f"{t_nb * 1e3:9.2f}", f"{t_np / t_nb:7.2f}x"]
    else:
        row += ["        -", "      -"]
    return row


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--shots", type=int, default=1 << 20)
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--ou-shots", type=int, default=1 << 13)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    print(f"numba available: {_kernels.NUMBA_ENABLED}")
    print(f"{'kernel':<20}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for row in (
        bench_count_transitions(args.shots, args.repeat),
        bench_ou_phases(args.ou_shots, args.steps, args.repeat),
    ):
        print(f"{row[0]:<20}{row[1]:>10}{row[2]:>10}{row[3]:>9}")


if __name__ == "__main__":
    main()
