"""Infix rendering of expressions.

Raw parser trees are printed faithfully, so that reparsing the text yields
the identical raw tree.  Canonical trees are first converted to a display
tree (signs pulled out, negative powers moved to denominators, square roots
shown as ``sqrt``) and then printed the same way.
"""
from __future__ import annotations

import math
from fractions import Fraction

from .nodes import (ADD, CONST, DIV, FUNC, MUL, NEG, POW, VAR, Expr, const,
                    raw_add, raw_div, raw_func, raw_mul, raw_neg, raw_pow)

_LEVEL_EXPR, _LEVEL_TERM, _LEVEL_FACTOR, _LEVEL_ATOM = range(4)


def render(e: Expr) -> str:
    """Text form of ``e`` in the parser grammar."""
    if not e.raw and e.kind not in (CONST, VAR):
        e = display_tree(e)
    memo: dict = {}
    return _render(e, _LEVEL_EXPR, memo)


def _const_text(v) -> str:
    if isinstance(v, float):
        return "pi" if v == math.pi else repr(v)
    if v.denominator == 1:
        return str(v.numerator)
    return f"({v.numerator}/{v.denominator})"


def _level(e: Expr) -> int:
    k = e.kind
    if k == ADD:
        return _LEVEL_EXPR
    if k in (MUL, DIV):
        return _LEVEL_TERM
    if k in (NEG, POW):
        return _LEVEL_FACTOR
    if k == CONST:
        v = e.value
        if v < 0 and (isinstance(v, float) or v.denominator == 1):
            return _LEVEL_FACTOR
        return _LEVEL_ATOM
    return _LEVEL_ATOM


def _render(e: Expr, ctx: int, memo) -> str:
    key = (id(e), ctx)
    hit = memo.get(key)
    if hit is not None:
        return hit
    s = _render_bare(e, memo)
    if _level(e) < ctx:
        s = "(" + s + ")"
    memo[key] = s
    return s


def _render_bare(e: Expr, memo) -> str:
    k = e.kind
    if k == CONST:
        return _const_text(e.value)
    if k == VAR:
        return e.value
    if k == FUNC:
        return f"{e.value}({_render(e.args[0], _LEVEL_EXPR, memo)})"
    if k == NEG:
        return "-" + _render(e.args[0], _LEVEL_FACTOR, memo)
    if k == POW:
        base = e.args[0]
        b = _render(base, _LEVEL_ATOM, memo)
        ex = e.value
        if ex.denominator == 1 and ex >= 0:
            et = str(ex.numerator)
        elif ex.denominator == 1:
            et = f"({ex.numerator})"
        else:
            et = f"({ex.numerator}/{ex.denominator})"
        return f"{b}^{et}"
    if k == DIV:
        a, b = e.args
        left = _render(a, _LEVEL_TERM if a.kind in (MUL, DIV) else _LEVEL_FACTOR, memo)
        return left + "/" + _render(b, _LEVEL_FACTOR, memo)
    if k == MUL:
        parts = []
        for i, c in enumerate(e.args):
            if i == 0 and c.kind == DIV:
                parts.append(_render(c, _LEVEL_TERM, memo))
            else:
                parts.append(_render(c, _LEVEL_FACTOR, memo))
        return "*".join(parts)
    if k == ADD:
        out = []
        for i, c in enumerate(e.args):
            if i == 0:
                out.append(_render(c, _LEVEL_TERM, memo))
            elif c.kind == NEG:
                out.append(" - " + _render(c.args[0], _LEVEL_TERM, memo))
            elif c.kind == CONST and c.value < 0:
                out.append(" - " + _render(const(-c.value), _LEVEL_TERM, memo))
            else:
                out.append(" + " + _render(c, _LEVEL_TERM, memo))
        return "".join(out)
    raise ValueError(f"cannot render node kind {k}")  # pragma: no cover


# ---------------------------------------------------------------------------
# canonical -> display tree
# ---------------------------------------------------------------------------

def display_tree(e: Expr) -> Expr:
    """Raw tree that renders ``e`` readably and normalizes back to ``e``."""
    memo: dict = {}
    return _disp(e, memo)


def _disp(e: Expr, memo) -> Expr:
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    k = e.kind
    if k in (CONST, VAR):
        r = e
    elif k == FUNC:
        r = raw_func(e.value, _disp(e.args[0], memo))
    elif k == POW:
        r = _disp_product(Fraction(1), [e], memo)
    elif k == MUL:
        if e.args[0].kind == CONST:
            r = _disp_product(e.args[0].value, list(e.args[1:]), memo)
        else:
            r = _disp_product(Fraction(1), list(e.args), memo)
    elif k == ADD:
        r = _disp_sum(e, memo)
    else:
        r = e
    memo[id(e)] = r
    return r


def _text_key(node: Expr, memo) -> str:
    return _render(node, _LEVEL_EXPR, {})


def _disp_power(base: Expr, ex: Fraction, memo) -> Expr:
    b = _disp(base, memo)
    if ex == 1:
        return b
    if ex == Fraction(1, 2):
        return raw_func("sqrt", b)
    return raw_pow(b, ex)


def _disp_product(c, factors, memo) -> Expr:
    num, den = [], []
    for f in factors:
        if f.kind == POW and f.value < 0:
            den.append(_disp_power(f.args[0], -f.value, memo))
        elif f.kind == POW:
            num.append(_disp_power(f.args[0], f.value, memo))
        else:
            num.append(_disp(f, memo))
    num.sort(key=lambda n: _text_key(n, memo))
    den.sort(key=lambda n: _text_key(n, memo))
    negative = c < 0
    mag = -c if negative else c
    if isinstance(mag, float):
        cn, cd = mag, 1
    else:
        cn, cd = mag.numerator, mag.denominator
    if cn != 1 or not num:
        num.insert(0, const(cn))
    if cd != 1:
        den.insert(0, const(cd))
    if negative:
        num[0] = raw_neg(num[0])
    top = num[0] if len(num) == 1 else raw_mul(num)
    if not den:
        return top
    bottom = den[0] if len(den) == 1 else raw_mul(den)
    return raw_div(top, bottom) if not (top.kind == CONST and bottom.kind == CONST) \
        else _keep_div(top, bottom)


def _keep_div(top, bottom):
    # both constant: a plain rational constant renders the same value
    return const(Fraction(top.value) / Fraction(bottom.value))


def _disp_sum(e: Expr, memo) -> Expr:
    terms = []
    for t in e.args:
        if t.kind == CONST:
            v = t.value
            terms.append((1, _const_text(abs(v)), v < 0, const(abs(v)), t))
            continue
        if t.kind == MUL and t.args[0].kind == CONST:
            c = t.args[0].value
            rest = list(t.args[1:])
        else:
            c = Fraction(1)
            rest = [t]
        neg = c < 0
        mag = _disp_product(-c if neg else c, rest, memo)
        signed = _disp_product(c, rest, memo) if neg else mag
        terms.append((0, _text_key(mag, memo), neg, mag, signed))
    terms.sort(key=lambda x: (x[0], x[1]))
    out = []
    for i, (_, _, neg, mag, signed) in enumerate(terms):
        if not neg:
            out.append(mag)
        elif i == 0 or mag.kind == CONST:
            out.append(signed if mag.kind != CONST else const(-mag.value))
        else:
            out.append(raw_neg(mag))
    return raw_add(out)
