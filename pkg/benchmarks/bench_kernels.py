"""Time the sparse-attention segment kernels: numba vs pure numpy.

    python3 benchmarks/bench_kernels.py [--n 512 1024 2048 4096] [--window 64] [--interval 32]

Each row is one attention forward + backward (sddmm, segment softmax, spmm
and their gradients) for ``heads`` heads of width ``d``. The numba column
excludes compilation, which happens in a warm-up call.
"""

import argparse
import time

import numpy as np

from longfin.attention import build_pattern
from longfin.kernels import _numba, _numpy


def attention_pass(k, q, key, v, g, p):
    s = k.sddmm(q, key, p.indptr, p.indices) * np.float32(1.0 / np.sqrt(q.shape[-1]))
    probs = k.segment_softmax(s, p.indptr)
    out = k.spmm(probs, v, p.indptr, p.indices)
    dprobs = k.sddmm(g, v, p.indptr, p.indices)
    dv = k.spmm(np.ascontiguousarray(probs[:, p.transpose_perm]), g, p.indptr, p.indices)
    ds = k.segment_softmax_grad(probs, dprobs, p.indptr)
    dq = k.spmm(ds, key, p.indptr, p.indices)
    dk = k.spmm(np.ascontiguousarray(ds[:, p.transpose_perm]), q, p.indptr, p.indices)
    return out, dq, dk, dv


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[512, 1024, 2048, 4096])
    ap.add_argument("--window", type=int, default=64)
    ap.add_argument("--interval", type=int, default=32)
    ap.add_argument("--heads", type=int, default=4)
    ap.add_argument("--d", type=int, default=32)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"window={args.window} interval={args.interval} heads={args.heads} d={args.d}")
    print(f"{'n':>6} {'nnz':>10} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    for n in args.n:
        p = build_pattern(n, args.window, args.interval)
        q, key, v, g = (rng.standard_normal((args.heads, n, args.d)).astype(np.float32) for _ in range(4))
        ref = attention_pass(_numpy, q, key, v, g, p)
        got = attention_pass(_numba, q, key, v, g, p)  # compiles on first use
        diff = max(float(np.abs(a - b).max()) for a, b in zip(ref, got))
        t_np = best_of(lambda: attention_pass(_numpy, q, key, v, g, p), args.repeats)
        t_nb = best_of(lambda: attention_pass(_numba, q, key, v, g, p), args.repeats)
        print(f"{n:>6} {p.nnz:>10} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} {t_np / t_nb:>7.2f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
