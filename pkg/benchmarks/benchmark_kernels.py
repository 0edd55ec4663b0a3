#!/usr/bin/env python3
"""Benchmark the numba cost-matrix kernels against the numpy fallback.

Both backends sit behind the same public functions in adaptrack.kernels, so
the comparison also doubles as an agreement check: every timed pair of runs
asserts the two backends produce identical matrices to a few ulps.

Usage:
    python3 benchmarks/benchmark_kernels.py
    python3 benchmarks/benchmark_kernels.py --sizes 50 200 800 --dim 128
    python3 benchmarks/benchmark_kernels.py --output results.json
"""

import argparse
import json
import time
from datetime import datetime

import numpy as np

from adaptrack import kernels


def warmup_jit():
    """Trigger JIT compilation so timings exclude compile cost."""
    if not kernels.NUMBA_AVAILABLE:
        return
    print("Warming up JIT compilation...")
    kernels.set_backend("numba")
    kernels.warmup()
    kernels.set_backend(None)
    print("JIT warmup complete.\n")


def random_boxes(rng, n):
    out = np.empty((n, 4))
    out[:, :2] = rng.uniform(0, 1000, size=(n, 2))
    out[:, 2:] = rng.uniform(5, 60, size=(n, 2))
    return out


def unit_rows(rng, n, dim):
    v = rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def time_backend(backend, fn, repeats):
    kernels.set_backend(backend)
    try:
        fn()  # one untimed call absorbs allocator noise
        start = time.perf_counter()
        for _ in range(repeats):
            out = fn()
        elapsed = (time.perf_counter() - start) / repeats * 1000
    finally:
        kernels.set_backend(None)
    return elapsed, out


def run_case(name, sizes, make_fn, repeats, results):
    print(f"\n{name}")
    print(f"{'n':>6} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9} {'max diff':>10}")
    print("-" * 53)
    for n in sizes:
        fn = make_fn(n)
        numpy_ms, ref = time_backend("numpy", fn, repeats)
        if kernels.NUMBA_AVAILABLE:
            numba_ms, got = time_backend("numba", fn, repeats)
            diff = float(np.max(np.abs(got - ref))) if ref.size else 0.0
            speedup = numpy_ms / numba_ms if numba_ms > 0 else 0.0
            print(f"{n:>6} {numpy_ms:>12.4f} {numba_ms:>12.4f} {speedup:>8.1f}x {diff:>10.2e}")
        else:
            numba_ms, diff, speedup = None, None, None
            print(f"{n:>6} {numpy_ms:>12.4f} {'-':>12} {'-':>9} {'-':>10}")
        results.append({
            "kernel": name,
            "n": n,
            "numpy_ms": numpy_ms,
            "numba_ms": numba_ms,
            "speedup": speedup,
            "max_abs_diff": diff,
        })


def main():
    parser = argparse.ArgumentParser(description="Benchmark cost-matrix kernels")
    parser.add_argument("--sizes", type=int, nargs="+", default=[20, 100, 400, 1000],
                        help="matrix side lengths (n detections x n tracks)")
    parser.add_argument("--dim", type=int, default=64,
                        help="embedding dimension for the cosine and fused cases")
    parser.add_argument("--repeats", type=int, default=20,
                        help="timed calls per measurement")
    parser.add_argument("--output", type=str, default=None,
                        help="write results to this JSON file")
    args = parser.parse_args()

    print("=" * 53)
    print("COST-MATRIX KERNEL BENCHMARK")
    print("=" * 53)
    print(f"Date: {datetime.now().isoformat()}")
    print(f"Numba available: {kernels.NUMBA_AVAILABLE}")
    print(f"Sizes: {args.sizes}  dim: {args.dim}  repeats: {args.repeats}")
    if not kernels.NUMBA_AVAILABLE:
        print("\nNumba is not installed; only the numpy fallback will run.")

    warmup_jit()

    rng = np.random.default_rng(0)
    results = []

    def make_iou(n):
        d, t = random_boxes(rng, n), random_boxes(rng, n)
        return lambda: kernels.iou_cost_matrix(d, t)

    def make_cosine(n):
        d, t = unit_rows(rng, n, args.dim), unit_rows(rng, n, args.dim)
        return lambda: kernels.cosine_cost_matrix(d, t)

    def make_fused(n):
        db, tb = random_boxes(rng, n), random_boxes(rng, n)
        de, te = unit_rows(rng, n, args.dim), unit_rows(rng, n, args.dim)
        dh = rng.uniform(size=n) < 0.9
        th = rng.uniform(size=n) < 0.9
        wl, wd = rng.uniform(size=n), rng.uniform(size=n)
        return lambda: kernels.fused_cost_matrix(db, tb, de, te, dh, th, wl, wd)

    run_case("IOU COST MATRIX", args.sizes, make_iou, args.repeats, results)
    run_case("COSINE COST MATRIX", args.sizes, make_cosine, args.repeats, results)
    run_case("FUSED COST MATRIX", args.sizes, make_fused, args.repeats, results)

    if kernels.NUMBA_AVAILABLE:
        speedups = [r["speedup"] for r in results if r["speedup"]]
        print(f"\nMedian speedup across all cases: {np.median(speedups):.1f}x")
        worst = max(r["max_abs_diff"] for r in results)
        print(f"Worst backend disagreement: {worst:.2e}")

    if args.output:
        payload = {
            "metadata": {
                "date": datetime.now().isoformat(),
                "numba_available": kernels.NUMBA_AVAILABLE,
                "sizes": args.sizes,
                "dim": args.dim,
                "repeats": args.repeats,
            },
            "results": results,
        }
        with open(args.output, "w") as f:
            json.dump(payload, f, indent=2)
        print(f"\nResults saved to {args.output}")


if __name__ == "__main__":
    main()
