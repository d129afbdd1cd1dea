#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Covers the two hot paths: nearest-centroid assignment (the inner loop of
k-means over sentence embeddings) and hashed n-gram counting (the student
featurizer). Run after `python setup.py build_ext --inplace` to see both
columns; without the extension only the fallback is reported.

    python benchmarks/bench_kernels.py [--n 4000] [--k 100] [--d 768]
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from harmkit.kernels import implementations


def time_fn(fn, reps: int) -> float:
    best = float("inf")
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_assign(impls, n: int, k: int, d: int, reps: int):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(n, d))
    c = rng.normal(size=(k, d))
    print(f"\nassign_nearest: n={n} k={k} d={d} (best of {reps})")
    results = {}
    for name, impl in impls.items():
        seconds = time_fn(lambda impl=impl: impl.assign_nearest(x, c), reps)
        results[name] = seconds
        print(f"  {name:>9}: {seconds * 1e3:9.2f} ms")
    _speedup(results)
    labels = {name: impl.assign_nearest(x, c)[0] for name, impl in impls.items()}
    values = list(labels.values())
    assert all((v == values[0]).all() for v in values), "implementations disagree"


def bench_ngrams(impls, docs: int, length: int, reps: int):
    rng = random.Random(1)
    alphabet = "的一是了我不人在他有这上们来到时大地为子中你说生国年着就那和要她"
    texts = ["".join(rng.choice(alphabet) for _ in range(length))
             for _ in range(docs)]
    print(f"\nngram_hash_counts: docs={docs} len={length} orders=(1,2,3) "
          f"(best of {reps})")
    results = {}
    for name, impl in impls.items():
        def run(impl=impl):
            for t in texts:
                impl.ngram_hash_counts(t, (1, 2, 3), 1 << 18, 0)
        seconds = time_fn(run, reps)
        results[name] = seconds
        print(f"  {name:>9}: {seconds * 1e3:9.2f} ms")
    _speedup(results)


def _speedup(results: dict[str, float]):
    if "compiled" in results and "python" in results:
        print(f"  {'speedup':>9}: {results['python'] / results['compiled']:9.2f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4000)
    parser.add_argument("--k", type=int, default=100)
    parser.add_argument("--d", type=int, default=768)
    parser.add_argument("--docs", type=int, default=300)
    parser.add_argument("--len", dest="length", type=int, default=200)
    parser.add_argument("--reps", type=int, default=3)
    args = parser.parse_args()

    impls = implementations()
    print("available kernel implementations:", ", ".join(impls))
    bench_assign(impls, args.n, args.k, args.d, args.reps)
    bench_ngrams(impls, args.docs, args.length, args.reps)


if __name__ == "__main__":
    main()
