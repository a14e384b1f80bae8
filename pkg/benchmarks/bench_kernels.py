"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the split-search and max-flow kernels from both implementations on
identical inputs, checks that they agree, and prints timings.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pancseg import kernels
from pancseg.kernels import _fallback as fallback

if kernels.IMPLEMENTATION != "cython":
    raise SystemExit(
        "compiled kernels are not active (IMPLEMENTATION="
        f"{kernels.IMPLEMENTATION!r}); build the extension or unset "
        "PANCSEG_PURE_PYTHON before benchmarking"
    )


def bench(fn, *args, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_best_split(repeats):
    rng = np.random.default_rng(42)
    n, d = 20_000, 64
    X = rng.random((n, d))
    y = rng.random(n)
    node = np.arange(n, dtype=np.intp)
    feats = np.arange(d, dtype=np.intp)
    thr = np.sort(rng.random((d, 32)), axis=1)

    t_c, r_c = bench(kernels.best_split, X, y, node, feats, thr, 5, repeats=repeats)
    t_p, r_p = bench(fallback.best_split, X, y, node, feats, thr, 5, repeats=repeats)
    assert r_c[0] == r_p[0] and r_c[1] == r_p[1], "split results disagree"
    assert abs(r_c[2] - r_p[2]) < 1e-9, "split gains disagree"
    report("best_split (n=20000, d=64, 32 thresholds)", t_c, t_p)


def bench_maxflow(repeats):
    rng = np.random.default_rng(7)
    n = 4_000
    m = 24_000
    cap_src = rng.random(n) * 10
    cap_snk = rng.random(n) * 10
    eu = rng.integers(0, n, size=m).astype(np.intp)
    ev = rng.integers(0, n, size=m).astype(np.intp)
    keep = eu != ev
    eu, ev = eu[keep], ev[keep]
    cap = rng.random(eu.size) * 5

    t_c, r_c = bench(kernels.maxflow, n, cap_src, cap_snk, eu, ev, cap, repeats=repeats)
    t_p, r_p = bench(fallback.maxflow, n, cap_src, cap_snk, eu, ev, cap, repeats=repeats)
    assert abs(r_c[0] - r_p[0]) < 1e-6 * max(1.0, abs(r_c[0])), "flow values disagree"
    report(f"maxflow (n={n}, m={eu.size} undirected pairs)", t_c, t_p)


def report(label, t_c, t_p):
    print(f"{label}")
    print(f"  cython : {t_c * 1e3:9.2f} ms")
    print(f"  python : {t_p * 1e3:9.2f} ms")
    print(f"  speedup: {t_p / t_c:9.1f}x")


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeats", type=int, default=3, help="take best of N runs")
    args = p.parse_args()
    bench_best_split(args.repeats)
    bench_maxflow(args.repeats)


if __name__ == "__main__":
    main()
