"""Backend selection for the numeric kernels.

The compiled extension is used when importable; setting the environment
variable ``EDSYM_PURE=1`` forces the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("EDSYM_PURE") != "1":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels

import numpy as np


def run_program(ops, a0, a1, fv, args, inputs, tol=1e-12, backend=None):
    """Evaluate an encoded program; see :func:`edsym._pykernels.run_program`."""
    impl = _select(backend)
    inputs = np.ascontiguousarray(inputs, dtype=np.float64)
    return impl.run_program(ops, a0, a1, fv, args, inputs, tol)


def matrix_rank(A, tol=1e-9, backend=None):
    """Numeric rank with pivot threshold ``tol`` relative to the largest entry."""
    return int(_select(backend).matrix_rank(A, tol))


def batch_rank(A, tol=1e-9, backend=None):
    """Ranks of a stack of matrices (first axis indexes the sample points)."""
    return _select(backend).batch_rank(A, tol)


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {backend!r}")
