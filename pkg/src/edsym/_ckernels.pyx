# cython: language_level=3
"""Compiled kernels: expression-program evaluation and sampled row reduction.

The opcode table must stay in sync with :mod:`edsym._pykernels`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, tan, exp, log, sqrt, atan, pow, fabs, NAN, M_PI_2

cnp.import_array()

DEF OP_LOAD = 0
DEF OP_CONST = 1
DEF OP_ADD = 2
DEF OP_MUL = 3
DEF OP_POWI = 4
DEF OP_POWF = 5
DEF OP_NEG = 6
DEF OP_DIV = 7
DEF OP_SIN = 8
DEF OP_COS = 9
DEF OP_TAN = 10
DEF OP_COT = 11
DEF OP_EXP = 12
DEF OP_LN = 13
DEF OP_SQRT = 14
DEF OP_ARCTAN = 15
DEF OP_ARCCOT = 16


cdef inline double _powi(double b, long n, double tol) nogil:
    cdef double r = 1.0
    cdef long m = n if n >= 0 else -n
    cdef double base = b
    if n < 0 and fabs(b) < tol:
        return NAN
    while m > 0:
        if m & 1:
            r *= base
        base *= base
        m >>= 1
    if n < 0:
        return 1.0 / r
    return r


def run_program(const int[:] ops, const long[:] a0, const long[:] a1,
                const double[:] fv, const long[:] args,
                const double[:, :] inputs, double tol):
    """Evaluate a straight-line program at every row of ``inputs``.

    Returns the full register matrix of shape ``(npts, ninstr)``.
    Singular operations produce NaN.
    """
    cdef Py_ssize_t npts = inputs.shape[0]
    cdef Py_ssize_t nins = ops.shape[0]
    out_arr = np.empty((npts, nins), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t p, i, k
    cdef double v, b, s, c
    cdef long start, cnt
    with nogil:
        for p in range(npts):
            for i in range(nins):
                op = ops[i]
                if op == OP_LOAD:
                    v = inputs[p, a0[i]]
                elif op == OP_CONST:
                    v = fv[i]
                elif op == OP_ADD:
                    start = a0[i]
                    cnt = a1[i]
                    v = 0.0
                    for k in range(cnt):
                        v += out[p, args[start + k]]
                elif op == OP_MUL:
                    start = a0[i]
                    cnt = a1[i]
                    v = 1.0
                    for k in range(cnt):
                        v *= out[p, args[start + k]]
                elif op == OP_POWI:
                    v = _powi(out[p, a0[i]], a1[i], tol)
                elif op == OP_POWF:
                    b = out[p, a0[i]]
                    if fv[i] < 0 and fabs(b) < tol:
                        v = NAN
                    elif b >= 0:
                        v = pow(b, fv[i])
                    elif a1[i] == 1:
                        v = -pow(-b, fv[i])
                    elif a1[i] == 2:
                        v = pow(-b, fv[i])
                    else:
                        v = NAN
                elif op == OP_NEG:
                    v = -out[p, a0[i]]
                elif op == OP_DIV:
                    b = out[p, a1[i]]
                    if fabs(b) < tol:
                        v = NAN
                    else:
                        v = out[p, a0[i]] / b
                elif op == OP_SIN:
                    v = sin(out[p, a0[i]])
                elif op == OP_COS:
                    v = cos(out[p, a0[i]])
                elif op == OP_TAN:
                    b = out[p, a0[i]]
                    c = cos(b)
                    if fabs(c) < tol:
                        v = NAN
                    else:
                        v = sin(b) / c
                elif op == OP_COT:
                    b = out[p, a0[i]]
                    s = sin(b)
                    if fabs(s) < tol:
                        v = NAN
                    else:
                        v = cos(b) / s
                elif op == OP_EXP:
                    v = exp(out[p, a0[i]])
                elif op == OP_LN:
                    b = out[p, a0[i]]
                    if b <= 0:
                        v = NAN
                    else:
                        v = log(b)
                elif op == OP_SQRT:
                    b = out[p, a0[i]]
                    if b < 0:
                        v = NAN
                    else:
                        v = sqrt(b)
                elif op == OP_ARCTAN:
                    v = atan(out[p, a0[i]])
                elif op == OP_ARCCOT:
                    v = M_PI_2 - atan(out[p, a0[i]])
                else:
                    v = NAN
                out[p, i] = v
    return out_arr


cdef double ROW_FLOOR = 1e-12


cdef Py_ssize_t _rank_inplace(double[:, :] A, double tol) nogil:
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t i, j, r, col, best
    cdef double mx, a, f, t, gmx = 0.0
    cdef Py_ssize_t rank = 0
    for i in range(m):
        for j in range(n):
            a = fabs(A[i, j])
            if a > gmx:
                gmx = a
    # scale rows so that the largest entry of each row is one; rows that
    # are round-off relative to the whole matrix are treated as zero
    for i in range(m):
        mx = 0.0
        for j in range(n):
            a = fabs(A[i, j])
            if a > mx:
                mx = a
        if mx > ROW_FLOOR * gmx:
            for j in range(n):
                A[i, j] /= mx
        else:
            for j in range(n):
                A[i, j] = 0.0
    for col in range(n):
        if rank >= m:
            break
        best = -1
        mx = tol
        for r in range(rank, m):
            a = fabs(A[r, col])
            if a > mx:
                mx = a
                best = r
        if best < 0:
            continue
        if best != rank:
            for j in range(n):
                t = A[rank, j]
                A[rank, j] = A[best, j]
                A[best, j] = t
        for r in range(rank + 1, m):
            f = A[r, col] / A[rank, col]
            if f != 0.0:
                for j in range(col, n):
                    A[r, j] -= f * A[rank, j]
        rank += 1
    return rank


def matrix_rank(A, double tol=1e-9):
    """Rank of a dense matrix by partially pivoted elimination on scaled rows."""
    cdef double[:, :] W = np.array(A, dtype=np.float64, copy=True, order="C")
    if W.shape[0] == 0 or W.shape[1] == 0:
        return 0
    return int(_rank_inplace(W, tol))


def batch_rank(A, double tol=1e-9):
    """Ranks of a stack of matrices with shape ``(s, m, n)``."""
    cdef double[:, :, :] W = np.array(A, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t s = W.shape[0]
    out_arr = np.zeros(s, dtype=np.int64)
    cdef long[:] out = out_arr
    cdef Py_ssize_t k
    if W.shape[1] == 0 or W.shape[2] == 0:
        return out_arr
    for k in range(s):
        out[k] = _rank_inplace(W[k], tol)
    return out_arr
