"""The numba and numpy kernel backends must agree."""

import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from longfin import kernels
from longfin.attention import build_pattern
from longfin.kernels import _numba, _numpy

patterns = st.builds(build_pattern, st.integers(1, 40), st.integers(0, 12), st.integers(1, 20))


@given(patterns, st.integers(1, 3), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_backends_agree(p, h, d, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((h, p.n, d)).astype(np.float32)
    b = rng.standard_normal((h, p.n, d)).astype(np.float32)
    s = (rng.standard_normal((h, p.nnz)) * 3).astype(np.float32)
    dp = rng.standard_normal((h, p.nnz)).astype(np.float32)
    args = (p.indptr, p.indices)
    assert np.allclose(_numpy.sddmm(a, b, *args), _numba.sddmm(a, b, *args), atol=1e-5)
    assert np.allclose(_numpy.spmm(s, b, *args), _numba.spmm(s, b, *args), atol=1e-4)
    probs = _numpy.segment_softmax(s, p.indptr)
    assert np.allclose(probs, _numba.segment_softmax(s, p.indptr), atol=1e-6)
    assert np.allclose(_numpy.segment_softmax_grad(probs, dp, p.indptr),
                       _numba.segment_softmax_grad(probs, dp, p.indptr), atol=1e-5)


def test_numba_is_deterministic():
    p = build_pattern(300, 32, 16)
    rng = np.random.default_rng(0)
    w = rng.random((2, p.nnz)).astype(np.float32)
    b = rng.standard_normal((2, p.n, 8)).astype(np.float32)
    first = _numba.spmm(w, b, p.indptr, p.indices)
    for _ in range(3):
        assert np.array_equal(first, _numba.spmm(w, b, p.indptr, p.indices))


def test_segment_softmax_rows_are_distributions():
    p = build_pattern(50, 6, 7)
    s = np.random.default_rng(3).standard_normal((2, p.nnz)).astype(np.float32) * 20
    probs = kernels.segment_softmax(s, p.indptr)
    sums = np.add.reduceat(probs.astype(np.float64), p.indptr[:-1], axis=1)
    assert np.abs(sums - 1).max() < 1e-6


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_env_flag_selects_backend(backend):
    code = "from longfin import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={"LONGFIN_KERNELS": backend, "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == backend


def test_env_flag_rejects_unknown():
    code = "import longfin.kernels"
    res = subprocess.run([sys.executable, "-c", code], env={"LONGFIN_KERNELS": "cuda"}, capture_output=True, text=True)
    assert res.returncode != 0 and "LONGFIN_KERNELS" in res.stderr
