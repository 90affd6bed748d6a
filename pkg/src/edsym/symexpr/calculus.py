"""Differentiation and substitution on canonical expressions."""
from __future__ import annotations

from fractions import Fraction

from .nodes import (ADD, CONST, FUNC, MUL, ONE, POW, VAR, ZERO, Expr, add, as_expr,
                    const, cos, cot, exp, func, mul, power, postorder, sin, tan)


def _dfunc(name: str, a: Expr) -> Expr:
    if name == "sin":
        return cos(a)
    if name == "cos":
        return mul(-1, sin(a))
    if name == "tan":
        return add(1, power(tan(a), 2))
    if name == "cot":
        return mul(-1, add(1, power(cot(a), 2)))
    if name == "exp":
        return exp(a)
    if name == "ln":
        return power(a, -1)
    if name == "sqrt":
        return mul(Fraction(1, 2), power(a, Fraction(-1, 2)))
    if name == "arctan":
        return power(add(1, power(a, 2)), -1)
    if name == "arccot":
        return mul(-1, power(add(1, power(a, 2)), -1))
    raise ValueError(f"no derivative rule for {name!r}")  # pragma: no cover


def diff(e, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to the variable ``v``.

    Derivatives are memoized on the nodes, so repeated differentiation of
    shared subexpressions (as in Lie brackets of large frames) is cheap.
    """
    e = as_expr(e)
    if isinstance(v, Expr):
        if v.kind != VAR:
            raise TypeError("can only differentiate with respect to a variable")
        v = v.value
    if v not in e.free:
        return ZERO
    if e._diff is not None and v in e._diff:
        return e._diff[v]

    def done(n):
        return v not in n.free or (n._diff is not None and v in n._diff)

    for n in postorder([e], skip=done):
        if v not in n.free:
            continue
        d = n._diff
        if d is None:
            d = n._diff = {}
        elif v in d:
            continue
        d[v] = _diff_node(n, v)
    return e._diff[v]


def _child(c: Expr, v: str) -> Expr:
    if v not in c.free:
        return ZERO
    return c._diff[v]


def _diff_node(n: Expr, v: str) -> Expr:
    k = n.kind
    if k == VAR:
        return ONE if n.value == v else ZERO
    if k == CONST:
        return ZERO
    if k == ADD:
        return add(*(_child(a, v) for a in n.args if v in a.free))
    if k == MUL:
        terms = []
        args = n.args
        for i, a in enumerate(args):
            if v not in a.free:
                continue
            da = _child(a, v)
            if da is ZERO:
                continue
            terms.append(mul(da, *(args[:i] + args[i + 1:])))
        return add(*terms)
    if k == POW:
        b = n.args[0]
        return mul(const(n.value), power(b, n.value - 1), _child(b, v))
    if k == FUNC:
        a = n.args[0]
        return mul(_dfunc(n.value, a), _child(a, v))
    raise ValueError("differentiate normalized expressions only")  # pragma: no cover


def rebuild(n: Expr, args) -> Expr:
    """Canonical node of the same kind as ``n`` with new children."""
    k = n.kind
    if k == ADD:
        return add(*args)
    if k == MUL:
        return mul(*args)
    if k == POW:
        return power(args[0], n.value)
    if k == FUNC:
        return func(n.value, args[0])
    return n


def subs(e, mapping: dict) -> Expr:
    """Simultaneously substitute variables by expressions.

    Parameters
    ----------
    e : Expr
    mapping : dict
        Variable name (or variable Expr) to replacement (Expr or number).
    """
    e = as_expr(e)
    m = {}
    for k, val in mapping.items():
        name = k.value if isinstance(k, Expr) else k
        m[name] = as_expr(val)
    keys = frozenset(m)
    return subs_many([e], m, keys)[0]


def subs_many(exprs, m: dict, keys=None, memo=None) -> list:
    """Substitute into several expressions sharing one memo table."""
    if keys is None:
        keys = frozenset(m)
    if memo is None:
        memo = {}
    exprs = [as_expr(x) for x in exprs]

    def skip(n):
        return id(n) in memo or not (n.free & keys)

    for n in postorder(exprs, skip=skip):
        if id(n) in memo:
            continue
        if not (n.free & keys):
            memo[id(n)] = n
            continue
        if n.kind == VAR:
            memo[id(n)] = m[n.value]
            continue
        memo[id(n)] = rebuild(n, [memo[id(a)] for a in n.args])
    return [memo[id(x)] for x in exprs]


def gradient(e, names) -> list:
    """List of partial derivatives in the order of ``names``."""
    return [diff(e, v) for v in names]
