"""Numeric evaluation: a guarded scalar evaluator and compiled batch programs.

Batch evaluation flattens the expression DAG into a straight-line program
that the kernels in :mod:`edsym.kernels` run over many points at once.
Singular operations (near-zero denominators, logarithms of non-positive
numbers and so on) yield NaN in batch mode and raise in scalar mode.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .. import kernels
from .._pykernels import (OP_ADD, OP_ARCCOT, OP_ARCTAN, OP_CONST, OP_COS, OP_COT,
                          OP_DIV, OP_EXP, OP_LN, OP_LOAD, OP_MUL, OP_NEG, OP_POWF,
                          OP_POWI, OP_SIN, OP_SQRT, OP_TAN)
from .nodes import ADD, CONST, DIV, FUNC, MUL, NEG, POW, VAR, Expr, as_expr, postorder

ZERO_TOL = 1e-12

_FUNC_OPS = {"sin": OP_SIN, "cos": OP_COS, "tan": OP_TAN, "cot": OP_COT, "exp": OP_EXP,
             "ln": OP_LN, "sqrt": OP_SQRT, "arctan": OP_ARCTAN, "arccot": OP_ARCCOT}


class EvaluationError(ArithmeticError):
    """Base class for evaluation failures."""


class UnboundVariableError(EvaluationError):
    """A free variable has no value in the assignment."""


class SingularityError(EvaluationError):
    """Division by (near) zero, or a pole of tan/cot."""


class DomainError(EvaluationError):
    """Argument outside the real domain of a function."""


# ---------------------------------------------------------------------------
# scalar evaluation
# ---------------------------------------------------------------------------

def _fn(name, x):
    if name == "sin":
        return math.sin(x)
    if name == "cos":
        return math.cos(x)
    if name == "tan":
        c = math.cos(x)
        if abs(c) < ZERO_TOL:
            raise SingularityError(f"tan pole at {x!r}")
        return math.sin(x) / c
    if name == "cot":
        s = math.sin(x)
        if abs(s) < ZERO_TOL:
            raise SingularityError(f"cot pole at {x!r}")
        return math.cos(x) / s
    if name == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    if name == "ln":
        if x <= 0:
            raise DomainError(f"ln of non-positive value {x!r}")
        return math.log(x)
    if name == "sqrt":
        if x < 0:
            raise DomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    if name == "arctan":
        return math.atan(x)
    if name == "arccot":
        return math.pi / 2 - math.atan(x)
    raise ValueError(name)  # pragma: no cover


def _pow(b, e: Fraction):
    if e < 0 and abs(b) < ZERO_TOL:
        raise SingularityError("negative power of a near-zero base")
    if e.denominator == 1:
        return b ** int(e)
    if b >= 0:
        return b ** float(e)
    if e.denominator % 2 == 1:
        r = (-b) ** float(e)
        return -r if e.numerator % 2 else r
    raise DomainError(f"even root of negative value {b!r}")


def eval_expr(e, assignment) -> float:
    """Evaluate ``e`` at a point.

    Parameters
    ----------
    e : Expr
        Raw or canonical expression.
    assignment : mapping
        Variable name to real value.

    Raises
    ------
    UnboundVariableError, SingularityError, DomainError
    """
    e = e if isinstance(e, Expr) else as_expr(e)
    missing = sorted(n for n in e.free if n not in assignment)
    if missing:
        raise UnboundVariableError(f"unbound variable(s): {', '.join(missing)}")
    vals = {}
    for n in postorder([e]):
        k = n.kind
        if k == CONST:
            v = float(n.value)
        elif k == VAR:
            v = float(assignment[n.value])
        else:
            a = [vals[id(c)] for c in n.args]
            if k == ADD:
                v = math.fsum(a)
            elif k == MUL:
                v = 1.0
                for x in a:
                    v *= x
            elif k == POW:
                v = _pow(a[0], n.value)
            elif k == NEG:
                v = -a[0]
            elif k == DIV:
                if abs(a[1]) < ZERO_TOL:
                    raise SingularityError("division by near-zero value")
                v = a[0] / a[1]
            elif k == FUNC:
                v = _fn(n.value, a[0])
            else:  # pragma: no cover
                raise ValueError(k)
        vals[id(n)] = v
    return vals[id(e)]


# ---------------------------------------------------------------------------
# compiled programs
# ---------------------------------------------------------------------------

class _Encoder:
    def __init__(self):
        self.ops, self.a0, self.a1, self.fv = [], [], [], []
        self.args = []
        self.reg = {}

    def emit(self, op, a0=0, a1=0, fv=0.0):
        self.ops.append(op)
        self.a0.append(a0)
        self.a1.append(a1)
        self.fv.append(fv)
        return len(self.ops) - 1

    def node(self, n: Expr):
        k = n.kind
        r = self.reg
        if k == CONST:
            return self.emit(OP_CONST, fv=float(n.value))
        if k in (ADD, MUL):
            start = len(self.args)
            self.args.extend(r[id(c)] for c in n.args)
            return self.emit(OP_ADD if k == ADD else OP_MUL, start, len(n.args))
        if k == POW:
            b = r[id(n.args[0])]
            e = n.value
            if e.denominator == 1:
                return self.emit(OP_POWI, b, int(e))
            flag = 0
            if e.denominator % 2 == 1:
                flag = 1 if e.numerator % 2 else 2
            return self.emit(OP_POWF, b, flag, float(e))
        if k == NEG:
            return self.emit(OP_NEG, r[id(n.args[0])])
        if k == DIV:
            return self.emit(OP_DIV, r[id(n.args[0])], r[id(n.args[1])])
        if k == FUNC:
            return self.emit(_FUNC_OPS[n.value], r[id(n.args[0])])
        raise ValueError(f"cannot compile node kind {k}")  # pragma: no cover

    def arrays(self):
        return (np.asarray(self.ops, dtype=np.int32), np.asarray(self.a0, dtype=np.int64),
                np.asarray(self.a1, dtype=np.int64), np.asarray(self.fv, dtype=np.float64),
                np.asarray(self.args, dtype=np.int64))


class Program:
    """A compiled set of expressions over named input columns.

    Parameters
    ----------
    roots : sequence of Expr
    names : sequence of str
        Input variable names; every free variable of ``roots`` must appear.
    """

    def __init__(self, roots, names):
        self.roots = [as_expr(r) for r in roots]
        self.names = list(names)
        col = {n: i for i, n in enumerate(self.names)}
        missing = sorted({v for r in self.roots for v in r.free} - set(col))
        if missing:
            raise UnboundVariableError(f"unbound variable(s): {', '.join(missing)}")
        enc = _Encoder()
        for n in postorder(self.roots):
            if n.kind == VAR:
                enc.reg[id(n)] = enc.emit(OP_LOAD, col[n.value])
            else:
                enc.reg[id(n)] = enc.node(n)
        self._code = enc.arrays()
        self._out = np.asarray([enc.reg[id(r)] for r in self.roots], dtype=np.int64)
        self._keep = self.roots

    def __call__(self, points, backend=None) -> np.ndarray:
        """Values with shape ``(len(roots), npts)``; NaN marks singular points."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None] if len(self.names) == 1 else pts[None, :]
        if pts.shape[1] != len(self.names):
            raise ValueError("points must have one column per input name")
        if len(self._out) == 0:
            return np.zeros((0, pts.shape[0]))
        regs = kernels.run_program(*self._code, pts, ZERO_TOL, backend=backend)
        return regs[:, self._out].T.copy()


def lambdify(exprs, names):
    """Compile expressions into a callable ``f(points) -> values``."""
    return Program(exprs, names)


class Evaluator:
    """Cached batch evaluator for a fixed set of points.

    Values of every node ever evaluated are memoized, so evaluating a new
    expression that shares subexpressions with earlier ones only computes
    the new nodes.

    Parameters
    ----------
    names : sequence of str
        Variable names (columns of ``points``).
    points : numpy.ndarray
        Array of shape ``(npts, len(names))``.
    """

    def __init__(self, names, points):
        self.names = list(names)
        self.col = {n: i for i, n in enumerate(self.names)}
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.npts = self.points.shape[0]
        self._cache: dict = {}
        self._keep: dict = {}

    def values(self, exprs) -> np.ndarray:
        """Values with shape ``(len(exprs), npts)``."""
        exprs = [as_expr(e) for e in exprs]
        cache = self._cache
        todo = [e for e in exprs if id(e) not in cache]
        if todo:
            self._compute(todo)
        if not exprs:
            return np.zeros((0, self.npts))
        return np.array([cache[id(e)] for e in exprs])

    def value(self, e) -> np.ndarray:
        return self.values([e])[0]

    def _compute(self, roots):
        cache = self._cache
        order = postorder(roots, skip=lambda n: id(n) in cache)
        enc = _Encoder()
        cols = []
        new_nodes = []
        for n in order:
            if id(n) in cache:
                enc.reg[id(n)] = enc.emit(OP_LOAD, len(cols))
                cols.append(cache[id(n)])
            elif n.kind == VAR:
                if n.value not in self.col:
                    raise UnboundVariableError(f"unbound variable: {n.value}")
                enc.reg[id(n)] = enc.emit(OP_LOAD, len(cols))
                cols.append(self.points[:, self.col[n.value]])
                new_nodes.append(n)
            else:
                enc.reg[id(n)] = enc.node(n)
                new_nodes.append(n)
        inputs = np.column_stack(cols) if cols else np.zeros((self.npts, 0))
        regs = kernels.run_program(*enc.arrays(), inputs, ZERO_TOL)
        for n in new_nodes:
            cache[id(n)] = regs[:, enc.reg[id(n)]].copy()
            self._keep[id(n)] = n

    def max_subterm(self, e) -> np.ndarray:
        """Largest absolute value over all DAG nodes of ``e`` at each point."""
        nodes = postorder([as_expr(e)])
        vals = self.values(nodes)
        with np.errstate(invalid="ignore"):
            return np.nanmax(np.abs(vals), axis=0)
