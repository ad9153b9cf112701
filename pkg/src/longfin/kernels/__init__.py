"""Backend selection for the sparse-attention segment kernels.

``LONGFIN_KERNELS=numba`` (default when numba imports) or ``numpy`` picks the
implementation at import time. Both backends expose the same four functions.
"""

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

_requested = os.environ.get("LONGFIN_KERNELS", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"LONGFIN_KERNELS must be 'numba' or 'numpy', got {_requested!r}")

_backend = _numpy
BACKEND = "numpy"
if _requested == "numba":
    try:
        from . import _numba

        _backend = _numba
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        log.warning("numba unavailable, falling back to numpy kernels")

sddmm = _backend.sddmm
spmm = _backend.spmm
segment_softmax = _backend.segment_softmax
segment_softmax_grad = _backend.segment_softmax_grad


def set_threads(n):
    """Cap the kernel worker count (no-op on the numpy backend)."""
    if BACKEND == "numba" and n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


__all__ = ["BACKEND", "sddmm", "spmm", "segment_softmax", "segment_softmax_grad", "set_threads"]
