"""Pure-numpy segment kernels over a CSR attention support.

Every kernel works on heads-first arrays: dense operands are ``(h, n, d)``,
per-entry operands are ``(h, nnz)``. Rows of the CSR structure must be
non-empty, which the attention patterns guarantee (self pairs are always
allowed), so ``reduceat`` never sees an empty segment.
"""

import numpy as np


def _rows(indptr):
    return np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))


def sddmm(a, b, indptr, cols):
    """Per-entry dot products ``out[h, e] = a[h, row(e)] . b[h, cols[e]]``."""
    rows = _rows(indptr)
    return np.einsum("hed,hed->he", a[:, rows, :], b[:, cols, :])


def spmm(w, b, indptr, cols):
    """Weighted row mix ``out[h, i] = sum_e w[h, e] * b[h, cols[e]]``.

    Rows of equal length form regular blocks (a banded pattern has few
    distinct lengths), so each block is one batched matmul. This is several
    times faster than ``reduceat`` along a middle axis.
    """
    lens = np.diff(indptr)
    out = np.empty((b.shape[0], len(lens), b.shape[2]), dtype=np.result_type(w, b))
    for length in np.unique(lens):
        rows = np.nonzero(lens == length)[0]
        entries = indptr[rows][:, None] + np.arange(length)
        out[:, rows, :] = np.matmul(w[:, entries][:, :, None, :], b[:, cols[entries], :])[:, :, 0, :]
    return out


def segment_softmax(s, indptr):
    rows = _rows(indptr)
    starts = indptr[:-1]
    m = np.maximum.reduceat(s, starts, axis=1)
    e = np.exp(s - m[:, rows])
    z = np.add.reduceat(e, starts, axis=1)
    return e / z[:, rows]


def segment_softmax_grad(p, dp, indptr):
    rows = _rows(indptr)
    dot = np.add.reduceat(p * dp, indptr[:-1], axis=1)
    return p * (dp - dot[:, rows])
