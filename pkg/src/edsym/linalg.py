"""Linear algebra over the expression field with sampled numeric guidance.

Ranks are decided numerically at sample points.  Symbolic Gaussian
elimination is carried out alongside a numeric copy of the matrix at every
sample; pivots are chosen at the base sample (exact nonzero constants first,
then largest magnitude, ties to the lowest row index), and entries that
vanish numerically at every sample are replaced by an exact zero.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .symexpr import CONST, ONE, ZERO, mul, neg, power, sub

RANK_TOL = 1e-9


def numeric_rank(M, tol: float = RANK_TOL) -> int:
    """Rank of one numeric matrix."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    return kernels.matrix_rank(M, tol)


def sampled_ranks(V, tol: float = RANK_TOL) -> np.ndarray:
    """Ranks of a stack ``V[s]`` of matrices, one per sample point."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 3 or V.shape[1] == 0 or V.shape[2] == 0:
        return np.zeros(V.shape[0], dtype=int)
    return np.asarray(kernels.batch_rank(V, tol), dtype=int)


def greedy_independent(rows, tol: float = RANK_TOL, start: int = 0) -> list:
    """Indices of a maximal independent subset chosen greedily in order.

    Parameters
    ----------
    rows : array_like, shape (c, n)
        Numeric row vectors (typically frame values at the base sample).
    tol : float
        A row is accepted when its reduced form has an entry larger than
        ``tol`` relative to the row's own largest entry.
    start : int
        The first ``start`` rows are accepted without testing (they are
        known to be independent).
    """
    rows = np.asarray(rows, dtype=float)
    basis = []
    chosen = []
    for i, r in enumerate(rows):
        mx = np.abs(r).max() if r.size else 0.0
        if mx == 0.0 and i >= start:
            continue
        w = r / mx if mx > 0 else r.copy()
        for p, b in basis:
            if w[p] != 0.0:
                w = w - w[p] * b
        j = int(np.argmax(np.abs(w))) if w.size else 0
        if i < start or (w.size and abs(w[j]) > tol):
            if w.size and w[j] != 0.0:
                basis.append((j, w / w[j]))
            chosen.append(i)
    return chosen


class SymbolicMatrix:
    """Matrix of expressions paired with its values at the sample points.

    Parameters
    ----------
    entries : list of list of Expr
        ``m`` rows of ``n`` expressions.
    values : numpy.ndarray
        Shape ``(s, m, n)``; ``values[k]`` is the matrix at sample ``k``.
    """

    def __init__(self, entries, values):
        self.E = [list(r) for r in entries]
        self.V = np.array(values, dtype=float)
        self.m = len(self.E)
        self.n = len(self.E[0]) if self.E else (self.V.shape[2] if self.V.ndim == 3 else 0)
        if self.V.ndim != 3:
            self.V = self.V.reshape((-1, self.m, self.n))

    def ranks(self, tol: float = RANK_TOL) -> np.ndarray:
        return sampled_ranks(self.V, tol)

    def rref(self, tol: float = RANK_TOL, columns=None):
        """Reduced row echelon form.

        Returns
        -------
        rows : list of list of Expr
            The nonzero reduced rows (pivot entries equal to one).
        values : numpy.ndarray
            Their sampled values, shape ``(s, rank, n)``.
        pivots : list of int
            Pivot column of each returned row.
        """
        E = [list(r) for r in self.E]
        V = self.V.copy()
        s, m, n = V.shape
        if m == 0 or n == 0:
            return [], np.zeros((s, 0, n)), []
        scale = np.abs(V).reshape(s, -1).max(axis=1)
        thr = tol * np.where(scale > 0, scale, 1.0)
        cols = range(n) if columns is None else columns
        row = 0
        pivots = []
        for col in cols:
            if row >= m:
                break
            base = np.abs(V[0, row:, col])
            cand = [row + i for i in np.nonzero(base > thr[0])[0]]
            if not cand:
                for i in range(row, m):
                    E[i][col] = ZERO
                V[:, row:, col] = 0.0
                continue
            consts = [i for i in cand if E[i][col].kind == CONST and E[i][col].value != 0]
            if consts:
                p = max(consts, key=lambda i: (abs(float(E[i][col].value)), -i))
            else:
                p = max(cand, key=lambda i: (abs(V[0, i, col]), -i))
            if p != row:
                E[p], E[row] = E[row], E[p]
                V[:, [p, row], :] = V[:, [row, p], :]
            piv = E[row][col]
            if piv is not ONE:
                inv = power(piv, -1)
                for j in range(n):
                    if j != col and E[row][j] is not ZERO:
                        E[row][j] = mul(E[row][j], inv)
                E[row][col] = ONE
                V[:, row, :] = V[:, row, :] / V[:, row, col][:, None]
            prow = E[row]
            for i in range(m):
                if i == row:
                    continue
                f = E[i][col]
                if f is ZERO:
                    continue
                Ei = E[i]
                for j in range(n):
                    if j == col or prow[j] is ZERO:
                        continue
                    Ei[j] = sub(Ei[j], mul(f, prow[j]))
                Ei[col] = ZERO
                V[:, i, :] = V[:, i, :] - V[:, i, col][:, None] * V[:, row, :]
                V[:, i, col] = 0.0
            # exact zeros for entries that vanish at every sample
            small = np.all(np.abs(V) <= thr[:, None, None], axis=0)
            for i, j in zip(*np.nonzero(small)):
                if E[i][j] is not ZERO:
                    E[i][j] = ZERO
            V[:, small] = 0.0
            pivots.append(col)
            row += 1
        return E[:row], V[:, :row, :], pivots

    def nullspace(self, tol: float = RANK_TOL):
        """Basis of the right nullspace.

        Returns
        -------
        vectors : list of list of Expr
        values : numpy.ndarray
            Shape ``(s, k, n)``.
        """
        R, RV, pivots = self.rref(tol)
        n = self.n
        s = self.V.shape[0]
        free = [j for j in range(n) if j not in pivots]
        vecs = []
        vals = np.zeros((s, len(free), n))
        for a, f in enumerate(free):
            v = [ZERO] * n
            v[f] = ONE
            vals[:, a, f] = 1.0
            for i, p in enumerate(pivots):
                if R[i][f] is not ZERO:
                    v[p] = neg(R[i][f])
                vals[:, a, p] = -RV[:, i, f]
            vecs.append(v)
        return vecs, vals


def solve(entries, rhs, values, rhs_values, tol: float = RANK_TOL):
    """Solve ``A x = b`` symbolically for square nonsingular ``A``.

    Returns
    -------
    list of Expr or None
        ``None`` when ``A`` is singular at the base sample.
    """
    m = len(entries)
    aug = [list(entries[i]) + [rhs[i]] for i in range(m)]
    V = np.concatenate([np.asarray(values, float), np.asarray(rhs_values, float)[:, :, None]],
                       axis=2)
    R, RV, piv = SymbolicMatrix(aug, V).rref(tol, columns=range(len(entries[0])))
    n = len(entries[0])
    if len(piv) < n:
        return None
    x = [ZERO] * n
    for i, p in enumerate(piv):
        x[p] = R[i][n]
    return x
