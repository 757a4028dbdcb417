"""Time the numba kernels against the pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--n 100000] [--dbar 25] [--repeat 3]

Both backends are imported directly, so the environment flag is not needed.
Numba compilation happens in a warm-up call that is not timed.
"""

import argparse
import time

import numpy as np

from hetsbm.hsbm import HsbmParams, pattern_family_a, sample_hsbm
from hetsbm.kernels import _numba, _numpy


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--dbar", type=float, default=25.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    params = HsbmParams.synthetic(pattern_family_a(0.25), n=args.n, dbar=args.dbar)
    graph = sample_hsbm(params, 0)
    indptr, indices = graph.csr_arrays()
    x64 = graph.features
    x32 = x64.astype(np.float32)
    lo = np.zeros_like(x64)

    rng = np.random.default_rng(0)
    pops = np.full(args.n * params.c, args.n // params.c, dtype=np.int64)
    counts = rng.binomial(pops, args.dbar / args.n).astype(np.int64)
    uniforms = rng.random(int(counts.sum()))

    cases = [
        ("row_mean float32", lambda m: m.row_mean(indptr, indices, x32)),
        ("row_mean float64", lambda m: m.row_mean(indptr, indices, x64)),
        ("dd_row_mean", lambda m: m.dd_row_mean(indptr, indices, x64, lo)),
        ("floyd_positions", lambda m: m.floyd_positions(counts, pops, uniforms)),
    ]
    print(f"n={args.n} edges={graph.edge_count} best of {args.repeat}")
    print(f"{'kernel':<18} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}")
    for name, call in cases:
        t_np = best_of(lambda: call(_numpy), args.repeat)
        t_nb = best_of(lambda: call(_numba), args.repeat)
        print(f"{name:<18} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
