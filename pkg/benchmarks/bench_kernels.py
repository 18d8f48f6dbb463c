"""Benchmark the accelerated kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Imports both backend implementations directly, so it works regardless of
the PNNCLR_DISABLE_NUMBA setting. Numba functions are called once before
timing to exclude JIT compilation.
"""

import argparse
import time

import numpy as np

from pnnclr import kernels


def _time(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_nn_search(repeats):
    print("nearest-neighbor search (queue_size x dim, 256 queries)")
    gen = np.random.default_rng(0)
    for m, d in [(1024, 16), (4096, 64), (16384, 128)]:
        queue = gen.standard_normal((m, d))
        queue /= np.linalg.norm(queue, axis=1, keepdims=True)
        queries = gen.standard_normal((256, d))
        queries /= np.linalg.norm(queries, axis=1, keepdims=True)
        t_np = _time(kernels.nn_search_numpy, (queue, queries), repeats)
        row = f"  {m:>6} x {d:<4} numpy {t_np * 1e3:8.3f} ms"
        if kernels._have_numba:
            kernels.nn_search_numba(queue, queries)  # warm up JIT
            t_nb = _time(kernels.nn_search_numba, (queue, queries), repeats)
            row += f"   numba {t_nb * 1e3:8.3f} ms   speedup {t_np / t_nb:5.2f}x"
        print(row)


def bench_mc_subset_hits(repeats):
    print("Monte-Carlo subset-hit counting (trials x population)")
    gen = np.random.default_rng(1)
    for trials, m in [(2000, 100), (2000, 1000), (500, 10000)]:
        keys = gen.uniform(size=(trials, m))
        ne, nq = max(1, m // 100), max(1, m // 10)
        t_np = _time(kernels.mc_subset_hits_numpy, (keys, ne, nq), repeats)
        row = f"  {trials:>6} x {m:<6} numpy {t_np * 1e3:8.3f} ms"
        if kernels._have_numba:
            kernels.mc_subset_hits_numba(keys, ne, nq)  # warm up JIT
            t_nb = _time(kernels.mc_subset_hits_numba, (keys, ne, nq), repeats)
            row += f"   numba {t_nb * 1e3:8.3f} ms   speedup {t_np / t_nb:5.2f}x"
        print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    print(f"active backend: {'numba' if kernels.NUMBA_ENABLED else 'numpy'}")
    bench_nn_search(args.repeats)
    bench_mc_subset_hits(args.repeats)


if __name__ == "__main__":
    main()
