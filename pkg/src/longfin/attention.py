"""Local sliding-window plus interval-global attention.

A pattern is stored as a symmetric CSR support: for each query row the sorted
key columns it may attend to. Scores, probabilities and their gradients live
only on that support (``(heads, nnz)`` arrays); no ``n x n`` matrix is built
outside :func:`pattern_to_dense_mask`, which exists for inspection and tests.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .autograd import Tensor, _result, reshape

# Largest per-call score buffer seen, in entries (heads * nnz). Reset with
# reset_score_stats(); used to check memory stays linear in n.
score_stats = {"peak_entries": 0, "calls": 0}


def reset_score_stats():
    score_stats["peak_entries"] = 0
    score_stats["calls"] = 0


@dataclass(frozen=True, eq=False)
class AttentionPattern:
    n: int
    window: int
    global_idx: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    transpose_perm: np.ndarray = field(repr=False)

    @property
    def radius(self):
        return self.window // 2

    @property
    def nnz(self):
        return int(self.indptr[-1])

    @property
    def rows(self):
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def allowed(self, i, j):
        if i in self._global_set or j in self._global_set:
            return True
        return abs(i - j) <= self.radius

    @functools.cached_property
    def _global_set(self):
        return frozenset(int(g) for g in self.global_idx)

    def row(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]


@functools.lru_cache(maxsize=64)
def build_pattern(n, window, interval):
    """Sliding window of ``window // 2`` tokens each side, plus global tokens
    at ``0, interval, 2 * interval, ...`` that attend to and are attended by
    every position."""
    if n < 1:
        raise ValueError(f"sequence length must be >= 1, got {n}")
    if interval < 1:
        raise ValueError(f"global interval must be >= 1, got {interval}")
    if window < 0:
        raise ValueError(f"window must be >= 0, got {window}")
    r = window // 2
    gidx = np.arange(0, n, interval, dtype=np.int64)
    is_global = np.zeros(n, dtype=bool)
    is_global[gidx] = True

    every = np.arange(n, dtype=np.int64)
    rows = []
    for i in range(n):
        if is_global[i]:
            rows.append(every)
            continue
        lo, hi = max(0, i - r), min(n - 1, i + r)
        rows.append(np.concatenate([gidx[gidx < lo], every[lo:hi + 1], gidx[gidx > hi]]))
    counts = np.fromiter((len(c) for c in rows), dtype=np.int64, count=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.concatenate(rows)

    # entry (i, j) -> position of (j, i); exists because the support is symmetric
    row_of = np.repeat(every, counts)
    keys = row_of * n + indices
    perm = np.searchsorted(keys, indices * n + row_of)

    for arr in (gidx, indptr, indices, perm):
        arr.setflags(write=False)
    return AttentionPattern(n, window, gidx, indptr, indices, perm)


def pattern_to_dense_mask(p):
    mask = np.zeros((p.n, p.n), dtype=bool)
    mask[p.rows, p.indices] = True
    return mask


def nnz(p):
    return p.nnz


def gather_dense(dense, p):
    """Pick the pattern's entries out of ``(..., n, n)`` scores -> ``(..., nnz)``."""
    return np.ascontiguousarray(dense[..., p.rows, p.indices])


# ---------------------------------------------------------------------------
# differentiable ops on the support


def _c(a):
    return np.ascontiguousarray(a)


def pattern_scores(q, k, p, scale=1.0):
    """``scale * q_i . k_j`` for every allowed pair; ``q, k`` are ``(h, n, d)``."""
    if q.ndim != 3 or q.shape != k.shape or q.shape[1] != p.n:
        raise ValueError(f"pattern_scores: q {q.shape}, k {k.shape}, pattern n={p.n}")
    qd, kd = _c(q.data), _c(k.data)
    s = kernels.sddmm(qd, kd, p.indptr, p.indices)
    if scale != 1.0:
        s *= s.dtype.type(scale)
    score_stats["calls"] += 1
    score_stats["peak_entries"] = max(score_stats["peak_entries"], s.size)

    def backward(g):
        g = _c(g * g.dtype.type(scale))
        dq = kernels.spmm(g, kd, p.indptr, p.indices)
        dk = kernels.spmm(_c(g[:, p.transpose_perm]), qd, p.indptr, p.indices)
        return dq, dk

    return _result(s, (q, k), backward)


def pattern_softmax(s, p):
    """Softmax over each row's allowed entries."""
    if s.ndim != 2 or s.shape[1] != p.nnz:
        raise ValueError(f"pattern_softmax: scores {s.shape} do not match nnz={p.nnz}")
    probs = kernels.segment_softmax(_c(s.data), p.indptr)
    return _result(probs, (s,), lambda g: (kernels.segment_softmax_grad(probs, _c(g), p.indptr),))


def pattern_mix(w, v, p):
    """``out_i = sum_j w_ij v_j`` over allowed pairs; ``w`` is ``(h, nnz)``, ``v`` is ``(h, n, d)``."""
    if v.ndim != 3 or v.shape[1] != p.n or w.shape != (v.shape[0], p.nnz):
        raise ValueError(f"pattern_mix: weights {w.shape}, values {v.shape}, nnz={p.nnz}")
    wd, vd = _c(w.data), _c(v.data)
    out = kernels.spmm(wd, vd, p.indptr, p.indices)

    def backward(g):
        g = _c(g)
        dw = kernels.sddmm(g, vd, p.indptr, p.indices)
        dv = kernels.spmm(_c(wd[:, p.transpose_perm]), g, p.indptr, p.indices)
        return dw, dv

    return _result(out, (w, v), backward)


def sparse_attention(q, k, v, p, extra_scores=None, dropout_rate=0.0, rng=None):
    """Pattern-restricted scaled dot-product attention.

    Accepts ``(n, d)`` or ``(h, n, d)`` operands. ``extra_scores`` (``(nnz,)`` or
    ``(h, nnz)``) is added to the scaled scores before the softmax.
    """
    from .autograd import add, dropout

    single = q.ndim == 2
    if single:
        q, k, v = (reshape(t, (1,) + t.shape) for t in (q, k, v))
        if extra_scores is not None:
            extra_scores = reshape(extra_scores, (1, -1))
    if k.shape[:2] != q.shape[:2] or v.shape[:2] != q.shape[:2]:
        raise ValueError(f"sparse_attention: q {q.shape}, k {k.shape}, v {v.shape}")
    s = pattern_scores(q, k, p, 1.0 / math.sqrt(q.shape[-1]))
    if extra_scores is not None:
        if extra_scores.shape != s.shape:
            raise ValueError(f"extra_scores {extra_scores.shape} must match support {s.shape}")
        s = add(s, extra_scores)
    probs = dropout(pattern_softmax(s, p), dropout_rate, rng)
    out = pattern_mix(probs, v, p)
    return reshape(out, out.shape[1:]) if single else out


__all__ = [
    "AttentionPattern",
    "Tensor",
    "build_pattern",
    "gather_dense",
    "nnz",
    "pattern_mix",
    "pattern_scores",
    "pattern_softmax",
    "pattern_to_dense_mask",
    "reset_score_stats",
    "score_stats",
    "sparse_attention",
]
