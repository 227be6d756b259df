#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the dense patch-search score maps (the pipeline's hot loop) and
the 3x3 median filter on a synthetic slice. The numba column includes a
discarded warm-up call, so JIT compilation is not measured.

Usage:
    python3 benchmarks/bench_backends.py [--size 256] [--patch 32] [--repeats 3]
"""

import argparse
import time

import numpy as np

from qsdenoise import _kernels_numpy
from qsdenoise.similarity import bin_indices

try:
    from qsdenoise import _kernels_numba
except ImportError:
    _kernels_numba = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=256, help="slice side")
    parser.add_argument("--patch", type=int, default=32, help="patch side")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    nd = rng.random((args.size, args.size))
    ld = rng.random((args.patch, args.patch))
    nd_idx = bin_indices(nd, 64, (0.0, 1.0))
    ld_idx = bin_indices(ld, 64, (0.0, 1.0))
    padded = np.pad(rng.random((args.size, args.size)), 1, mode="edge")

    cases = [
        ("nmi_score_map", lambda k: k.nmi_score_map(ld_idx, nd_idx, 64)),
        ("pearson_score_map", lambda k: k.pearson_score_map(ld, nd)),
        ("rbf_score_map", lambda k: k.rbf_score_map(ld, nd, 8.0)),
        ("median3x3", lambda k: k.median3x3(padded)),
    ]

    positions = (args.size - args.patch + 1) ** 2
    print(f"slice {args.size}x{args.size}, patch {args.patch}, "
          f"{positions} candidate positions per score map")
    print(f"{'kernel':<20}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, call in cases:
        t_np = best_of(lambda: call(_kernels_numpy), args.repeats)
        if _kernels_numba is None:
            print(f"{name:<20}{t_np:>11.3f}s{'n/a':>12}{'':>10}")
            continue
        call(_kernels_numba)  # warm-up / compile
        t_nb = best_of(lambda: call(_kernels_numba), args.repeats)
        print(f"{name:<20}{t_np:>11.3f}s{t_nb:>11.3f}s{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
