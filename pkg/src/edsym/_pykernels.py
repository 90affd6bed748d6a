"""Pure numpy kernels mirroring :mod:`edsym._ckernels`.

These are used when the compiled extension is unavailable, and serve as the
reference implementation in the kernel equivalence tests.
"""
import numpy as np

OP_LOAD = 0
OP_CONST = 1
OP_ADD = 2
OP_MUL = 3
OP_POWI = 4
OP_POWF = 5
OP_NEG = 6
OP_DIV = 7
OP_SIN = 8
OP_COS = 9
OP_TAN = 10
OP_COT = 11
OP_EXP = 12
OP_LN = 13
OP_SQRT = 14
OP_ARCTAN = 15
OP_ARCCOT = 16


def _guarded_div(a, b, tol):
    bad = np.abs(b) < tol
    safe = np.where(bad, 1.0, b)
    return np.where(bad, np.nan, a / safe)


def _powi(b, n, tol):
    if n >= 0:
        return b ** n
    bad = np.abs(b) < tol
    safe = np.where(bad, 1.0, b)
    return np.where(bad, np.nan, 1.0 / safe ** (-n))


def _powf(b, e, flag, tol):
    out = np.full_like(b, np.nan)
    small = np.abs(b) < tol
    pos = b >= 0
    mask = pos & ~(small & (e < 0))
    out[mask] = np.power(b[mask], e)
    if flag:
        neg = ~pos & ~(small & (e < 0))
        vals = np.power(-b[neg], e)
        out[neg] = -vals if flag == 1 else vals
    return out


def run_program(ops, a0, a1, fv, args, inputs, tol):
    """Evaluate a straight-line program column-wise over all points.

    Parameters
    ----------
    ops, a0, a1, fv, args : numpy.ndarray
        Encoded program (see :mod:`edsym.symexpr.evaluate`).
    inputs : numpy.ndarray
        Array of shape ``(npts, ncols)`` holding the loaded columns.
    tol : float
        Absolute tolerance for denominators and singular arguments.

    Returns
    -------
    numpy.ndarray
        Register matrix of shape ``(npts, len(ops))``.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    npts = inputs.shape[0]
    nins = len(ops)
    out = np.empty((npts, nins), dtype=np.float64)
    with np.errstate(all="ignore"):
        for i in range(nins):
            op = ops[i]
            if op == OP_LOAD:
                v = inputs[:, a0[i]]
            elif op == OP_CONST:
                v = np.full(npts, fv[i])
            elif op == OP_ADD:
                idx = args[a0[i]:a0[i] + a1[i]]
                v = out[:, idx].sum(axis=1)
            elif op == OP_MUL:
                idx = args[a0[i]:a0[i] + a1[i]]
                v = out[:, idx].prod(axis=1)
            elif op == OP_POWI:
                v = _powi(out[:, a0[i]], int(a1[i]), tol)
            elif op == OP_POWF:
                v = _powf(out[:, a0[i]], fv[i], int(a1[i]), tol)
            elif op == OP_NEG:
                v = -out[:, a0[i]]
            elif op == OP_DIV:
                v = _guarded_div(out[:, a0[i]], out[:, a1[i]], tol)
            elif op == OP_SIN:
                v = np.sin(out[:, a0[i]])
            elif op == OP_COS:
                v = np.cos(out[:, a0[i]])
            elif op == OP_TAN:
                x = out[:, a0[i]]
                v = _guarded_div(np.sin(x), np.cos(x), tol)
            elif op == OP_COT:
                x = out[:, a0[i]]
                v = _guarded_div(np.cos(x), np.sin(x), tol)
            elif op == OP_EXP:
                v = np.exp(out[:, a0[i]])
            elif op == OP_LN:
                x = out[:, a0[i]]
                v = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), np.nan)
            elif op == OP_SQRT:
                x = out[:, a0[i]]
                v = np.where(x >= 0, np.sqrt(np.where(x >= 0, x, 0.0)), np.nan)
            elif op == OP_ARCTAN:
                v = np.arctan(out[:, a0[i]])
            elif op == OP_ARCCOT:
                v = np.pi / 2 - np.arctan(out[:, a0[i]])
            else:
                v = np.full(npts, np.nan)
            out[:, i] = v
    return out


ROW_FLOOR = 1e-12


def matrix_rank(A, tol=1e-9):
    """Rank by partially pivoted elimination on max-scaled rows."""
    W = np.array(A, dtype=np.float64, copy=True)
    if W.ndim != 2 or W.size == 0:
        return 0
    m, n = W.shape
    scale = np.abs(W).max(axis=1)
    # rows that are round-off relative to the whole matrix count as zero
    nz = scale > ROW_FLOOR * scale.max()
    W[~nz] = 0.0
    W[nz] /= scale[nz, None]
    rank = 0
    for col in range(n):
        if rank >= m:
            break
        colvals = np.abs(W[rank:, col])
        best = int(np.argmax(colvals))
        if colvals[best] <= tol:
            continue
        best += rank
        if best != rank:
            W[[rank, best]] = W[[best, rank]]
        f = W[rank + 1:, col] / W[rank, col]
        W[rank + 1:, col:] -= np.outer(f, W[rank, col:])
        rank += 1
    return rank


def batch_rank(A, tol=1e-9):
    """Ranks of a stack of matrices with shape ``(s, m, n)``."""
    A = np.asarray(A, dtype=np.float64)
    return np.array([matrix_rank(A[k], tol) for k in range(A.shape[0])], dtype=np.int64)
