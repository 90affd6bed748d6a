"""Hash-consed immutable expression nodes and canonicalizing constructors.

Every node is interned: two canonical expressions with the same structure are
the same Python object, so identity comparison doubles as structural
equality.  Canonical (normalized) trees contain no ``Neg`` or ``Div`` nodes,
have flattened and collected ``Add``/``Mul`` nodes, and keep numeric
coefficients exact (:class:`fractions.Fraction`) unless a float literal was
supplied explicitly.

Raw trees, produced only by the parser, preserve the textual structure
(including ``Neg`` and ``Div``) and are flagged with ``raw=True``.  Raw trees
are converted with :func:`normalize`.
"""
from __future__ import annotations

import math
import weakref
import zlib
from fractions import Fraction
from numbers import Rational

CONST, VAR, ADD, MUL, POW, NEG, DIV, FUNC = range(8)
KIND_NAMES = ("Const", "Var", "Add", "Mul", "Pow", "Neg", "Div", "Func")
FUNCTIONS = ("sin", "cos", "tan", "cot", "exp", "ln", "sqrt", "arctan", "arccot")

_MASK = (1 << 61) - 1
_RANK = {CONST: 0, VAR: 1, FUNC: 2, POW: 3, MUL: 4, ADD: 5, NEG: 6, DIV: 7}

_table: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()
_freesets: dict = {}
_EMPTY = frozenset()


class Expr:
    """Immutable expression node.

    Attributes
    ----------
    kind : int
        One of ``CONST, VAR, ADD, MUL, POW, NEG, DIV, FUNC``.
    value : object
        Number for constants, name for variables and functions, exponent
        (a Fraction) for powers, ``None`` otherwise.
    args : tuple of Expr
        Children.
    raw : bool
        True for parser output that has not been normalized.
    free : frozenset of str
        Free variable names.
    h : int
        Deterministic structural hash used for canonical ordering.
    """

    __slots__ = ("kind", "value", "args", "raw", "free", "h", "_diff", "_norm", "__weakref__")

    def __init__(self):  # pragma: no cover - construction goes through _make
        raise TypeError("use the constructors in edsym.symexpr")

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, e):
        return power(self, e)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    # -- inspection --------------------------------------------------------
    @property
    def is_const(self) -> bool:
        return self.kind == CONST

    def is_number(self, v) -> bool:
        """True if this is a constant equal to ``v``."""
        return self.kind == CONST and self.value == v

    def __repr__(self):
        from .printer import render

        return f"Expr({render(self)!r})"

    def __str__(self):
        from .printer import render

        return render(self)

    def __reduce__(self):
        from .printer import render

        return (_unpickle, (render(self), self.raw))


def _unpickle(text, raw):
    from .parser import parse

    e = parse(text)
    return e if raw else normalize(e)


def _node_hash(kind, value, args):
    if kind == CONST:
        base = zlib.crc32(repr(value).encode())
    elif kind in (VAR, FUNC):
        base = zlib.crc32(value.encode())
    elif kind == POW:
        base = zlib.crc32(str(value).encode())
    else:
        base = 0
    h = ((kind + 1) * 0x9E3779B97F4A7C15 ^ base) & _MASK
    for a in args:
        h = (h * 1000003 + a.h) & _MASK
    return h


def _freeset(args):
    if not args:
        return _EMPTY
    if len(args) == 1:
        return args[0].free
    s = frozenset().union(*(a.free for a in args))
    return _freesets.setdefault(s, s)


def _make(kind, value, args, raw=False):
    if kind == CONST:
        key = (CONST, type(value) is float, value)
    else:
        key = (kind, value, raw) + tuple(map(id, args))
    node = _table.get(key)
    if node is not None:
        return node
    node = object.__new__(Expr)
    node.kind = kind
    node.value = value
    node.args = args
    node.raw = raw
    if kind == VAR:
        s = frozenset((value,))
        node.free = _freesets.setdefault(s, s)
    else:
        node.free = _freeset(args)
    node.h = _node_hash(kind, value, args)
    node._diff = None
    node._norm = None
    _table[key] = node
    return node


def sort_key(e: Expr):
    """Canonical ordering key for Add/Mul children."""
    return (_RANK[e.kind], e.h)


# ---------------------------------------------------------------------------
# coercion and leaves
# ---------------------------------------------------------------------------

def _num(v):
    if isinstance(v, bool):
        v = int(v)
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return v
    if isinstance(v, Rational):
        return Fraction(v.numerator, v.denominator)
    if isinstance(v, float):
        if math.isfinite(v) and v.is_integer() and abs(v) < 2 ** 53:
            return Fraction(int(v))
        return float(v)
    raise TypeError(f"cannot make a constant from {v!r}")


def const(v) -> Expr:
    """Constant node; integers and fractions are kept exact."""
    return _make(CONST, _num(v), ())


def var(name: str) -> Expr:
    """Variable node."""
    if not isinstance(name, str) or not name:
        raise ValueError("variable names must be nonempty strings")
    return _make(VAR, name, ())


def symbols(names: str):
    """Whitespace or comma separated names to a tuple of variables."""
    return tuple(var(n) for n in names.replace(",", " ").split())


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)
_KEEP = (ZERO, ONE, MINUS_ONE)


def as_expr(x) -> Expr:
    """Coerce numbers to constants and normalize raw trees."""
    if isinstance(x, Expr):
        return x if not x.raw else normalize(x)
    return const(x)


# ---------------------------------------------------------------------------
# canonical constructors
# ---------------------------------------------------------------------------

def _split_coeff(t: Expr):
    if t.kind == MUL and t.args[0].kind == CONST:
        c = t.args[0].value
        rest = t.args[1:]
        if len(rest) == 1:
            return c, rest[0]
        return c, _make(MUL, None, rest)
    return Fraction(1), t


def _scale(rest: Expr, c) -> Expr:
    if c == 1:
        return rest
    factors = rest.args if rest.kind == MUL else (rest,)
    return _make(MUL, None, (const(c),) + factors)


def add(*xs) -> Expr:
    """Canonical sum: flattened, constants folded, like terms collected."""
    terms = []
    for x in xs:
        x = as_expr(x)
        if x.kind == ADD:
            terms.extend(x.args)
        else:
            terms.append(x)
    c0 = Fraction(0)
    groups: dict = {}
    for t in terms:
        if t.kind == CONST:
            c0 = c0 + t.value
            continue
        c, rest = _split_coeff(t)
        if rest in groups:
            groups[rest] = groups[rest] + c
        else:
            groups[rest] = c
    out = [_scale(rest, c) for rest, c in groups.items() if c != 0]
    if c0 != 0:
        out.append(const(c0))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    out.sort(key=sort_key)
    return _make(ADD, None, tuple(out))


def mul(*xs) -> Expr:
    """Canonical product: flattened, constants folded, powers collected."""
    factors = []
    for x in xs:
        x = as_expr(x)
        if x.kind == MUL:
            factors.extend(x.args)
        else:
            factors.append(x)
    c = Fraction(1)
    groups: dict = {}
    for f in factors:
        if f.kind == CONST:
            c = c * f.value
            continue
        if f.kind == POW:
            base, e = f.args[0], f.value
        else:
            base, e = f, Fraction(1)
        if base in groups:
            groups[base] = groups[base] + e
        else:
            groups[base] = e
    if c == 0:
        return ZERO
    out = []
    again = False
    for base, e in groups.items():
        if e == 0:
            continue
        p = power(base, e)
        if p.kind == CONST:
            c = c * p.value
        elif p.kind == MUL:
            out.extend(p.args)
            again = True
        else:
            out.append(p)
    if again:
        return mul(const(c), *out)
    if c == 0:
        return ZERO
    if not out:
        return const(c)
    out.sort(key=sort_key)
    if c == 1:
        if len(out) == 1:
            return out[0]
        return _make(MUL, None, tuple(out))
    return _make(MUL, None, (const(c),) + tuple(out))


def _exact_root(v: Fraction, q: int):
    """Exact q-th root of a nonnegative rational, or None."""
    if v < 0:
        return None
    rn = _iroot(v.numerator, q)
    rd = _iroot(v.denominator, q)
    if rn is None or rd is None:
        return None
    return Fraction(rn, rd)


def _iroot(n: int, q: int):
    if n < 2:
        return n
    r = round(n ** (1.0 / q))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** q == n:
            return cand
    return None


def power(b, e) -> Expr:
    """Canonical power ``b**e`` with an integer or rational exponent."""
    b = as_expr(b)
    if isinstance(e, Expr):
        if e.kind != CONST or isinstance(e.value, float):
            raise TypeError("exponents must be rational constants")
        e = e.value
    if isinstance(e, float):
        if not e.is_integer():
            raise TypeError("exponents must be integers or rationals")
        e = int(e)
    e = Fraction(e)
    if e == 0:
        return ONE
    if e == 1:
        return b
    if b.kind == CONST:
        v = b.value
        if v == 0:
            if e < 0:
                raise ZeroDivisionError("zero raised to a negative power")
            return ZERO
        if v == 1:
            return ONE
        if e.denominator == 1:
            if isinstance(v, float):
                return const(v ** int(e))
            return const(v ** int(e))
        if isinstance(v, float):
            if v > 0:
                return const(v ** float(e))
        else:
            r = _exact_root(v, e.denominator)
            if r is not None:
                return const(r ** e.numerator)
        return _make(POW, e, (b,))
    if b.kind == POW and e.denominator == 1:
        return power(b.args[0], b.value * e)
    if b.kind == MUL and e.denominator == 1:
        return mul(*(power(f, e) for f in b.args))
    return _make(POW, e, (b,))


def neg(x) -> Expr:
    return mul(MINUS_ONE, x)


def sub(a, b) -> Expr:
    return add(a, mul(MINUS_ONE, b))


def div(a, b) -> Expr:
    b = as_expr(b)
    if b.kind == CONST and b.value == 0:
        raise ZeroDivisionError("division by exact zero")
    return mul(a, power(b, -1))


_FOLD_FLOAT = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "cot": lambda v: math.cos(v) / math.sin(v), "exp": math.exp, "ln": math.log,
    "sqrt": math.sqrt, "arctan": math.atan, "arccot": lambda v: math.pi / 2 - math.atan(v),
}


def func(name: str, x) -> Expr:
    """Canonical application of one of the built-in unary functions."""
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    x = as_expr(x)
    if x.kind == CONST:
        v = x.value
        if isinstance(v, float):
            try:
                return const(_FOLD_FLOAT[name](v))
            except (ValueError, ZeroDivisionError):
                pass
        elif v == 0 and name in ("sin", "tan", "arctan", "sqrt"):
            return ZERO
        elif v == 0 and name in ("cos", "exp"):
            return ONE
        elif v == 1 and name in ("ln",):
            return ZERO
        elif name == "sqrt":
            r = _exact_root(v, 2)
            if r is not None:
                return const(r)
            return _make(POW, Fraction(1, 2), (x,))
    if name == "sqrt":
        return power(x, Fraction(1, 2))
    if x.kind == FUNC:
        inner = x.value
        if (name, inner) in (("cot", "arccot"), ("tan", "arctan"), ("exp", "ln"), ("ln", "exp")):
            return x.args[0]
    return _make(FUNC, name, (x,))


def sin(x):
    return func("sin", x)


def cos(x):
    return func("cos", x)


def tan(x):
    return func("tan", x)


def cot(x):
    return func("cot", x)


def exp(x):
    return func("exp", x)


def ln(x):
    return func("ln", x)


def sqrt(x):
    return func("sqrt", x)


def arctan(x):
    return func("arctan", x)


def arccot(x):
    return func("arccot", x)


# ---------------------------------------------------------------------------
# raw constructors (parser only)
# ---------------------------------------------------------------------------

def raw_add(args):
    return _make(ADD, None, tuple(args), raw=True)


def raw_mul(args):
    return _make(MUL, None, tuple(args), raw=True)


def raw_div(a, b):
    if a.kind == CONST and b.kind == CONST and not isinstance(a.value, float) \
            and not isinstance(b.value, float) and b.value != 0:
        return const(a.value / b.value)
    return _make(DIV, None, (a, b), raw=True)


def raw_neg(a):
    if a.kind == CONST:
        return const(-a.value)
    return _make(NEG, None, (a,), raw=True)


def raw_pow(b, e):
    return _make(POW, Fraction(e), (b,), raw=True)


def raw_func(name, a):
    return _make(FUNC, name, (a,), raw=True)


# ---------------------------------------------------------------------------
# traversal helpers
# ---------------------------------------------------------------------------

def postorder(roots, skip=None):
    """Nodes reachable from ``roots`` in children-first order, each once.

    Parameters
    ----------
    roots : iterable of Expr
    skip : callable, optional
        Predicate; matching nodes are emitted but not descended into.
    """
    seen = set()
    out = []
    stack = [(r, False) for r in reversed(list(roots))]
    while stack:
        n, done = stack.pop()
        if done:
            out.append(n)
            continue
        if id(n) in seen:
            continue
        seen.add(id(n))
        if skip is not None and skip(n):
            out.append(n)
            continue
        stack.append((n, True))
        for a in reversed(n.args):
            if id(a) not in seen:
                stack.append((a, False))
    return out


def normalize(e: Expr) -> Expr:
    """Canonical form of a (possibly raw) expression."""
    if not e.raw:
        return e
    if e._norm is not None:
        return e._norm
    for n in postorder([e], skip=lambda n: not n.raw or n._norm is not None):
        if not n.raw or n._norm is not None:
            continue
        a = [c._norm if c.raw else c for c in n.args]
        if n.kind == ADD:
            r = add(*a)
        elif n.kind == MUL:
            r = mul(*a)
        elif n.kind == NEG:
            r = neg(a[0])
        elif n.kind == DIV:
            r = div(a[0], a[1])
        elif n.kind == POW:
            r = power(a[0], n.value)
        elif n.kind == FUNC:
            r = func(n.value, a[0])
        else:  # pragma: no cover
            r = n
        n._norm = r
    return e._norm


def count_nodes(e: Expr) -> int:
    """Number of distinct DAG nodes."""
    return len(postorder([e]))


def free_symbols(e) -> list:
    """Sorted list of free variable names."""
    return sorted(as_expr(e).free)
