"""Best-effort simplification by a fixed pass pipeline.

The passes are: constant folding, flattening and like-term collection (all
performed by the canonical constructors), then a rational normal form in
which the expression is written as ``N/D`` with ``N`` and ``D`` polynomials
over *atoms* (variables, function applications and fractional powers).
Inside the polynomial layer ``cos(a)^2`` is rewritten as ``1 - sin(a)^2``
when that does not increase the term count, and products of exponentials
are merged.  The result is checked numerically against the input and the
input is returned unchanged if the check fails or the polynomial layer
would blow up.
"""
from __future__ import annotations

import weakref
from fractions import Fraction

import numpy as np

from .nodes import (ADD, CONST, FUNC, MUL, POW, VAR, ZERO, Expr, add, as_expr,
                    count_nodes, exp, func, mul, power, sort_key)

TERM_LIMIT = 200
NODE_LIMIT = 2000
CHECK_POINTS = 5
CHECK_RTOL = 1e-9

_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


class _TooBig(Exception):
    pass


# ---------------------------------------------------------------------------
# sparse polynomials: {monomial: coefficient}, monomial = ((atom, exp), ...)
# ---------------------------------------------------------------------------

def _mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for a, e in m2:
        d[a] = d.get(a, 0) + e
    return _mono_norm(d)


def _mono_norm(d):
    items = [(a, e) for a, e in d.items() if e != 0]
    exps = [(a, e) for a, e in items if a.kind == FUNC and a.value == "exp"]
    if len(exps) > 1 or any(e != 1 for _, e in exps):
        items = [(a, e) for a, e in items if not (a.kind == FUNC and a.value == "exp")]
        arg = simplify(add(*(mul(e, a.args[0]) for a, e in exps)))
        if arg is not ZERO:
            items.append((exp(arg), 1))
    items.sort(key=lambda ae: sort_key(ae[0]))
    return tuple(items)


def _padd(p, q):
    out = dict(p)
    for m, c in q.items():
        v = out.get(m, 0) + c
        if v == 0:
            out.pop(m, None)
        else:
            out[m] = v
    return out


def _pmul(p, q):
    if len(p) * len(q) > TERM_LIMIT * 4:
        raise _TooBig
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mono_mul(m1, m2)
            v = out.get(m, 0) + c1 * c2
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
    if len(out) > TERM_LIMIT:
        raise _TooBig
    return out


def _ppow(p, n):
    out = {(): Fraction(1)}
    for _ in range(n):
        out = _pmul(out, p)
    return out


def _const_poly(c):
    return {(): c} if c != 0 else {}


_ONE_POLY = {(): Fraction(1)}


def _atom_poly(a, e=1):
    return {((a, e),): Fraction(1)}


def _to_rat(e: Expr, memo, quotients=False):
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    k = e.kind
    if k == CONST:
        r = (_const_poly(e.value), _ONE_POLY)
    elif k == VAR:
        r = (_atom_poly(e), _ONE_POLY)
    elif k == FUNC and quotients and e.value in ("cot", "tan"):
        a = simplify(e.args[0])
        s_, c_ = _atom_poly(func("sin", a)), _atom_poly(func("cos", a))
        r = (c_, s_) if e.value == "cot" else (s_, c_)
    elif k == FUNC:
        r = (_atom_poly(func(e.value, simplify(e.args[0]))), _ONE_POLY)
    elif k == POW:
        ex = e.value
        base = e.args[0]
        if ex.denominator == 1:
            n, d = _to_rat(base, memo, quotients)
            p = abs(int(ex))
            if p > 12:
                raise _TooBig
            if ex > 0:
                r = (_ppow(n, p), _ppow(d, p))
            else:
                r = (_ppow(d, p), _ppow(n, p))
        else:
            atom = power(simplify(base), Fraction(1, ex.denominator))
            if atom.kind != POW:
                r = _to_rat(power(atom, ex.numerator), memo, quotients)
            elif ex.numerator > 0:
                r = (_atom_poly(atom, ex.numerator), _ONE_POLY)
            else:
                r = (_ONE_POLY, _atom_poly(atom, -ex.numerator))
    elif k == ADD:
        n, d = _to_rat(e.args[0], memo, quotients)
        for a in e.args[1:]:
            n2, d2 = _to_rat(a, memo, quotients)
            if d2 == d:
                n = _padd(n, n2)
            else:
                n = _padd(_pmul(n, d2), _pmul(n2, d))
                d = _pmul(d, d2)
        r = (n, d)
    elif k == MUL:
        n, d = _ONE_POLY, _ONE_POLY
        for a in e.args:
            n2, d2 = _to_rat(a, memo, quotients)
            n = _pmul(n, n2)
            d = _pmul(d, d2)
        r = (n, d)
    else:
        raise _TooBig
    memo[id(e)] = r
    return r


def _pythagoras(p):
    """Rewrite every cos(a)^k with k >= 2 using cos^2 = 1 - sin^2."""
    work = dict(p)
    changed = True
    while changed:
        changed = False
        out = {}
        for m, c in work.items():
            hit = None
            for i, (a, e) in enumerate(m):
                if a.kind == FUNC and a.value == "cos" and e >= 2:
                    hit = (i, a, e)
                    break
            if hit is None:
                out = _padd(out, {m: c})
                continue
            changed = True
            i, a, e = hit
            d = dict(m)
            d[a] = e - 2
            m1 = _mono_norm(d)
            s = func("sin", a.args[0])
            m2 = _mono_mul(m1, ((s, 2),))
            out = _padd(out, {m1: c})
            out = _padd(out, {m2: -c})
            if len(out) > TERM_LIMIT:
                raise _TooBig
        work = out
    return work


def _mono_gcd(polys):
    common = None
    for p in polys:
        for m in p:
            d = dict(m)
            if common is None:
                common = d
            else:
                common = {a: min(e, d[a]) for a, e in common.items() if a in d}
            if not common:
                return {}
    return {a: e for a, e in (common or {}).items() if e > 0}


def _divide_mono(p, g):
    if not g:
        return p
    out = {}
    for m, c in p.items():
        d = dict(m)
        for a, e in g.items():
            d[a] = d[a] - e
        out[_mono_norm(d)] = c
    return out


def _leading(p):
    return min(p.items(), key=lambda mc: _mono_key(mc[0]))


def _mono_key(m):
    return (len(m), tuple((sort_key(a), e) for a, e in m))


def _normal_form(n, d):
    if not n:
        return {}, _ONE_POLY
    # move exponentials out of a monomial denominator
    if len(d) == 1:
        (m, c), = d.items()
        exps = [(a, e) for a, e in m if a.kind == FUNC and a.value == "exp"]
        if exps:
            inv = tuple((exp(mul(-e, a.args[0])), 1) for a, e in exps)
            inv = _mono_norm(dict(inv))
            n = {_mono_mul(mm, inv): cc for mm, cc in n.items()}
            n = _padd({}, n)
            rest = tuple((a, e) for a, e in m if not (a.kind == FUNC and a.value == "exp"))
            d = {rest: c}
    g = _mono_gcd([n, d])
    n = _divide_mono(n, g)
    d = _divide_mono(d, g)
    lm, lc = _leading(d)
    if lc != 1:
        n = {m: c / lc for m, c in n.items()}
        d = {m: c / lc for m, c in d.items()}
    # N proportional to D
    if len(n) == len(d) and set(n) == set(d):
        ratios = {n[m] / d[m] for m in d}
        if len(ratios) == 1:
            return _const_poly(ratios.pop()), _ONE_POLY
    return n, d


def _poly_expr(p) -> Expr:
    terms = []
    for m, c in sorted(p.items(), key=lambda mc: _mono_key(mc[0])):
        terms.append(mul(c, *(power(a, e) for a, e in m)))
    return add(*terms)


def _size(n, d):
    return len(n) + len(d)


def _weight(n, d):
    degree = sum(e for p in (n, d) for m in p for _, e in m)
    return (_size(n, d), degree)


def _atoms(*polys):
    return {a for p in polys for m in p for a, _ in m}


def _rnf(e: Expr) -> Expr:
    n, d = _to_rat(e, {})
    plain = _normal_form(n, d)
    try:
        trig = _normal_form(_pythagoras(n), _pythagoras(d))
    except _TooBig:
        trig = plain
    best = trig if _size(*trig) <= _size(*plain) else plain
    if any(a.kind == FUNC and a.value in ("cot", "tan") for a in _atoms(n, d)):
        # cot/tan written through sin and cos; kept only when strictly smaller
        try:
            qn, qd = _to_rat(e, {}, quotients=True)
            for cand in (_normal_form(qn, qd), _normal_form(_pythagoras(qn), _pythagoras(qd))):
                if _weight(*cand) < _weight(*best):
                    best = cand
        except _TooBig:
            pass
    num, den = best
    ne = _poly_expr(num)
    if den == _ONE_POLY:
        return ne
    return mul(ne, power(_poly_expr(den), -1))


def _check_points(names):
    rng = np.random.default_rng(20240917)
    return rng.uniform(0.1, 1.1, size=(CHECK_POINTS, len(names)))


def _agrees(a: Expr, b: Expr) -> bool:
    from .evaluate import Program

    names = sorted(a.free | b.free)
    pts = _check_points(names)
    va, vb = Program([a, b], names)(pts)
    finite_a = np.isfinite(va)
    finite_b = np.isfinite(vb)
    if np.any(finite_a != finite_b):
        return False
    m = finite_a
    scale = np.maximum(np.abs(va[m]), 1.0)
    return bool(np.all(np.abs(va[m] - vb[m]) <= 1e-7 * scale))


def simplify(e) -> Expr:
    """Simplified expression, numerically equivalent to ``e``.

    Examples
    --------
    >>> from edsym.symexpr import parse_expr, simplify
    >>> str(simplify(parse_expr("sin(a)^2 + cos(a)^2")))
    '1'
    """
    e = as_expr(e)
    if e.kind in (CONST, VAR):
        return e
    hit = _cache.get(e)
    if hit is not None:
        return hit
    r = e
    if count_nodes(e) <= NODE_LIMIT:
        try:
            cand = _rnf(e)
        except (_TooBig, ZeroDivisionError, RecursionError):
            cand = e
        if cand is not e and _agrees(e, cand):
            r = cand
    _cache[e] = r
    if r is not e:
        _cache.setdefault(r, r)
    return r
