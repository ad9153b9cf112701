"""Numba versions of the segment kernels in ``_numpy``.

Rows are processed in parallel; each row's reductions run sequentially, so
results do not depend on the thread count.
"""

import numba
import numpy as np
from numba import njit, prange

# prefer OpenMP; probing an old TBB only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(parallel=True, cache=True)
def sddmm(a, b, indptr, cols):
    h, n, d = a.shape
    out = np.empty((h, cols.shape[0]), dtype=a.dtype)
    for i in prange(n):
        for hh in range(h):
            for e in range(indptr[i], indptr[i + 1]):
                j = cols[e]
                acc = 0.0
                for k in range(d):
                    acc += a[hh, i, k] * b[hh, j, k]
                out[hh, e] = acc
    return out


@njit(parallel=True, cache=True)
def spmm(w, b, indptr, cols):
    h = b.shape[0]
    d = b.shape[2]
    n = indptr.shape[0] - 1
    out = np.zeros((h, n, d), dtype=b.dtype)
    for i in prange(n):
        for hh in range(h):
            for e in range(indptr[i], indptr[i + 1]):
                j = cols[e]
                we = w[hh, e]
                for k in range(d):
                    out[hh, i, k] += we * b[hh, j, k]
    return out


@njit(parallel=True, cache=True)
def segment_softmax(s, indptr):
    h = s.shape[0]
    n = indptr.shape[0] - 1
    out = np.empty_like(s)
    for i in prange(n):
        lo = indptr[i]
        hi = indptr[i + 1]
        for hh in range(h):
            m = s[hh, lo]
            for e in range(lo + 1, hi):
                if s[hh, e] > m:
                    m = s[hh, e]
            z = 0.0
            for e in range(lo, hi):
                v = np.exp(s[hh, e] - m)
                out[hh, e] = v
                z += v
            for e in range(lo, hi):
                out[hh, e] /= z
    return out


@njit(parallel=True, cache=True)
def segment_softmax_grad(p, dp, indptr):
    h = p.shape[0]
    n = indptr.shape[0] - 1
    out = np.empty_like(p)
    for i in prange(n):
        lo = indptr[i]
        hi = indptr[i + 1]
        for hh in range(h):
            dot = 0.0
            for e in range(lo, hi):
                dot += p[hh, e] * dp[hh, e]
            for e in range(lo, hi):
                out[hh, e] = p[hh, e] * (dp[hh, e] - dot)
    return out
