"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--reps N]
"""

import argparse
import time

import numpy as np

from hetdetect._backend import load


def best_of(fn, repeat=3):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--cols", type=int, default=30)
    args = ap.parse_args()

    scale = np.arange(1, args.cols + 1, dtype=np.float64)
    mean = np.zeros(args.cols)
    sorted_sigma = np.arange(1, 2001, dtype=np.float64)
    p2 = np.concatenate(([0.0], np.cumsum(sorted_sigma**2)))
    p4 = np.concatenate(([0.0], np.cumsum(sorted_sigma**4)))

    cases = {
        f"normal_block {args.reps}x{args.cols}": lambda k: k.normal_block(1, 0, 0, args.reps, args.cols),
        f"sumsq_block {args.reps}x{args.cols}": lambda k: k.sumsq_block(1, 0, 0, args.reps, mean, scale),
        "sparse_rate_scan N=2000": lambda k: k.sparse_rate_scan(p2, p4, 2000),
    }
    try:
        compiled = load("cython")
    except ImportError:
        compiled = None
        print("compiled extension not built; timing the fallback only")
    python = load("python")

    print(f"{'kernel':<32}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, fn in cases.items():
        tp = best_of(lambda: fn(python))
        if compiled is None:
            print(f"{name:<32}{tp:>12.4f}")
            continue
        tc = best_of(lambda: fn(compiled))
        print(f"{name:<32}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
