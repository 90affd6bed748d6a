"""Vector fields, one-forms and distributions over a coordinate chart.

All rank decisions are made numerically at the chart's sample points, while
frames, annihilators, Cauchy bundles and intersections are produced as
expression-valued objects by :class:`edsym.linalg.SymbolicMatrix`.

Examples
--------
>>> from edsym.diffgeo import Chart, Distribution, rank
>>> M = Chart(["x", "y", "z"])
>>> D = Distribution([M.coordinate_field("x"), M.coordinate_field("y")])
>>> rank(D).rank
2
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SymbolicMatrix, greedy_independent, sampled_ranks
from .symexpr import (CONST, ONE, ZERO, Evaluator, Expr, SampleDomain, SingularityError, add,
                      as_expr, count_nodes, diff, mul, parse_expr, postorder, simplify, sub,
                      subs_many)

ZERO_RTOL = 1e-9


class ChartMismatchError(ValueError):
    """Objects living on different charts were combined."""


class NotTotallyRegular(Exception):
    """Sampled ranks disagree across sample points.

    Attributes
    ----------
    where : str
        Description of the offending object (for example a flag level).
    ranks : list of int
        Rank at each sample point.
    """

    def __init__(self, where: str, ranks):
        self.where = where
        self.ranks = [int(r) for r in ranks]
        super().__init__(f"NOT-TOTALLY-REGULAR at {where}: sampled ranks {self.ranks}")


class Chart:
    """Ordered coordinates with state/control designations and a sample domain.

    Parameters
    ----------
    variables : sequence of str
        Coordinate names, in order.
    time : str or None
        Independent variable (must be one of ``variables`` if given).
    states, controls : sequence of str
        Disjoint blocks of ``variables``.
    domain : SampleDomain, optional
        Sample box, count and seed.
    singular : sequence of Expr or str
        Expressions that must stay away from zero at sample points.
    """

    def __init__(self, variables, time="t", states=(), controls=(), domain=None, singular=()):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise ValueError("chart variable names must be unique")
        if any(not v for v in variables):
            raise ValueError("chart variable names must be nonempty")
        if time is not None and time not in variables:
            time = None
        blocks = [set(states), set(controls), {time} if time else set()]
        if blocks[0] & blocks[1] or (blocks[0] | blocks[1]) & blocks[2]:
            raise ValueError("time, state and control blocks must be disjoint")
        for v in set(states) | set(controls):
            if v not in variables:
                raise ValueError(f"{v!r} is not a chart variable")
        self.variables = variables
        self.index = {v: i for i, v in enumerate(variables)}
        self.time = time
        self.states = tuple(states)
        self.controls = tuple(controls)
        self.domain = domain or SampleDomain()
        self.singular = tuple(parse_expr(s) if isinstance(s, str) else as_expr(s)
                              for s in singular)
        self._points = None
        self._evaluator = None

    @property
    def dim(self) -> int:
        return len(self.variables)

    def __repr__(self):
        return f"Chart({list(self.variables)})"

    def compatible(self, other: "Chart") -> bool:
        return self is other or self.variables == other.variables

    def with_domain(self, domain: SampleDomain) -> "Chart":
        return Chart(self.variables, self.time, self.states, self.controls, domain,
                     self.singular)

    # -- sampling ------------------------------------------------------------
    @property
    def points(self) -> np.ndarray:
        """Sample points avoiding the declared singular loci."""
        if self._points is None:
            self._points = self._draw()
        return self._points

    def _draw(self):
        pts = self.domain.points(self.variables)
        if not self.singular:
            return pts
        from .symexpr import Program

        prog = Program(self.singular, self.variables)
        for attempt in range(1, 200):
            vals = prog(pts)
            bad = np.any(~np.isfinite(vals) | (np.abs(vals) < 1e-6), axis=0)
            if not bad.any():
                return pts
            pts = pts.copy()
            pts[bad] = self.domain.points(self.variables, n=int(bad.sum()), stream=attempt)
        raise SingularityError("could not draw sample points away from the singular loci")

    @property
    def evaluator(self) -> Evaluator:
        if self._evaluator is None:
            self._evaluator = Evaluator(self.variables, self.points)
        return self._evaluator

    def values(self, exprs) -> np.ndarray:
        """Values of expressions at the sample points, shape ``(len, s)``."""
        vals = self.evaluator.values(exprs)
        if vals.size and not np.all(np.isfinite(vals)):
            raise SingularityError("an expression is singular at a chart sample point")
        return vals

    def is_zero(self, e, rtol: float = ZERO_RTOL) -> bool:
        """Sampled zero test at the chart's sample points."""
        e = as_expr(e)
        if e.kind == CONST:
            return float(e.value) == 0.0
        if count_nodes(e) <= 60 and simplify(e) is ZERO:
            return True
        ev = self.evaluator
        nodes = postorder([e])
        vals = ev.values(nodes)
        if not np.all(np.isfinite(vals[-1])):
            raise SingularityError("expression is singular at a chart sample point")
        with np.errstate(invalid="ignore"):
            scale = np.nanmax(np.abs(vals), axis=0)
        return bool(np.all(np.abs(vals[-1]) < rtol * (1.0 + scale)))

    # -- constructors --------------------------------------------------------
    def var(self, name):
        from .symexpr import var

        if name not in self.index:
            raise ChartMismatchError(f"{name!r} is not a variable of {self!r}")
        return var(name)

    def coordinate_field(self, name) -> "VectorField":
        comps = [ZERO] * self.dim
        comps[self.index[name]] = ONE
        return VectorField(self, comps, name=f"d_{name}")

    def differential(self, name) -> "OneForm":
        comps = [ZERO] * self.dim
        comps[self.index[name]] = ONE
        return OneForm(self, comps, name=f"d{name}")

    def field(self, components: dict, name: str = "") -> "VectorField":
        """Vector field from a mapping ``variable -> component``."""
        return VectorField.from_dict(self, components, name)

    def form(self, coefficients: dict, name: str = "") -> "OneForm":
        """One-form from a mapping ``variable -> coefficient of d(variable)``."""
        return OneForm.from_dict(self, coefficients, name)

    def check_expr(self, e):
        e = parse_expr(e) if isinstance(e, str) else as_expr(e)
        extra = sorted(e.free - set(self.variables))
        if extra:
            raise ChartMismatchError(f"undeclared variable(s) {', '.join(extra)}")
        return e


class _Components:
    __slots__ = ("chart", "comps", "name")

    def __init__(self, chart: Chart, comps, name: str = ""):
        comps = tuple(parse_expr(c) if isinstance(c, str) else as_expr(c) for c in comps)
        if len(comps) != chart.dim:
            raise ValueError(f"expected {chart.dim} components, got {len(comps)}")
        self.chart = chart
        self.comps = comps
        self.name = name

    @classmethod
    def from_dict(cls, chart, mapping, name=""):
        comps = [ZERO] * chart.dim
        for k, v in mapping.items():
            if k not in chart.index:
                raise ChartMismatchError(f"{k!r} is not a variable of {chart!r}")
            comps[chart.index[k]] = chart.check_expr(v)
        return cls(chart, comps, name)

    def _same(self, other):
        if not self.chart.compatible(other.chart):
            raise ChartMismatchError("objects live on different charts")

    def __getitem__(self, name):
        return self.comps[self.chart.index[name]]

    def as_dict(self):
        return {v: c for v, c in zip(self.chart.variables, self.comps) if c is not ZERO}

    def values(self) -> np.ndarray:
        """Component values at the sample points, shape ``(s, n)``."""
        return self.chart.values(self.comps).T

    def is_zero(self) -> bool:
        return all(self.chart.is_zero(c) for c in self.comps)

    def simplified(self):
        return type(self)(self.chart, [simplify(c) for c in self.comps], self.name)

    def __repr__(self):
        body = " + ".join(f"({c})*{self._basis(v)}" for v, c in self.as_dict().items()) or "0"
        return f"{type(self).__name__}({body})"


class VectorField(_Components):
    """Vector field: one component expression per chart coordinate."""

    @staticmethod
    def _basis(v):
        return f"d_{v}"

    def __call__(self, f) -> Expr:
        return apply(self, f)

    def __add__(self, other):
        self._same(other)
        return VectorField(self.chart, [add(a, b) for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        self._same(other)
        return VectorField(self.chart, [sub(a, b) for a, b in zip(self.comps, other.comps)])

    def scaled(self, f) -> "VectorField":
        f = as_expr(f)
        return VectorField(self.chart, [mul(f, c) for c in self.comps], self.name)

    def __neg__(self):
        return self.scaled(-1)


class OneForm(_Components):
    """One-form: the coefficient of each coordinate differential."""

    @staticmethod
    def _basis(v):
        return f"d{v}"

    def __call__(self, X: VectorField) -> Expr:
        self._same(X)
        return add(*(mul(a, b) for a, b in zip(self.comps, X.comps)
                     if a is not ZERO and b is not ZERO))

    def __add__(self, other):
        self._same(other)
        return OneForm(self.chart, [add(a, b) for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        self._same(other)
        return OneForm(self.chart, [sub(a, b) for a, b in zip(self.comps, other.comps)])

    def scaled(self, f) -> "OneForm":
        f = as_expr(f)
        return OneForm(self.chart, [mul(f, c) for c in self.comps], self.name)


def exterior_derivative_of(f, chart: Chart) -> OneForm:
    """The differential ``df`` of a function."""
    return OneForm(chart, [diff(f, v) for v in chart.variables])


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """Componentwise ``X(Y^i) - Y(X^i)``."""
    X._same(Y)
    comps = [sub(apply(X, yi), apply(Y, xi)) for xi, yi in zip(X.comps, Y.comps)]
    return VectorField(X.chart, comps)


def apply(X: VectorField, f) -> Expr:
    """Directional derivative ``sum_i X^i df/dx_i``."""
    f = as_expr(f)
    if isinstance(f, Expr) and not f.free:
        return ZERO
    extra = f.free - set(X.chart.variables)
    if extra:
        raise ChartMismatchError(f"undeclared variable(s) {', '.join(sorted(extra))}")
    terms = []
    for v, c in zip(X.chart.variables, X.comps):
        if c is ZERO or v not in f.free:
            continue
        d = diff(f, v)
        if d is not ZERO:
            terms.append(mul(c, d))
    return add(*terms)


class Distribution:
    """Ordered frame of vector fields spanning a (sampled) sub-bundle.

    Parameters
    ----------
    fields : sequence of VectorField
        Frame; need not be independent (see :meth:`pruned`).
    chart : Chart, optional
        Required when ``fields`` is empty.
    name : str
    """

    def __init__(self, fields, chart: Chart | None = None, name: str = ""):
        fields = tuple(fields)
        if chart is None:
            if not fields:
                raise ValueError("an empty distribution needs an explicit chart")
            chart = fields[0].chart
        for X in fields:
            if not chart.compatible(X.chart):
                raise ChartMismatchError("frame fields must share the chart")
        self.chart = chart
        self.frame = fields
        self.name = name
        self._values = None
        self._rank = None

    def __len__(self):
        return len(self.frame)

    def __iter__(self):
        return iter(self.frame)

    def __repr__(self):
        return f"Distribution({self.name or 'frame'}, {len(self.frame)} fields)"

    def __add__(self, other):
        """Sum of frames (not pruned)."""
        if isinstance(other, Distribution):
            other = other.frame
        return Distribution(self.frame + tuple(other), self.chart)

    def values(self) -> np.ndarray:
        """Frame values, shape ``(s, r, n)``."""
        if self._values is None:
            s = self.chart.points.shape[0]
            r, n = len(self.frame), self.chart.dim
            if r == 0:
                self._values = np.zeros((s, 0, n))
            else:
                flat = self.chart.values([c for X in self.frame for c in X.comps])
                self._values = flat.reshape(r, n, s).transpose(2, 0, 1).copy()
        return self._values

    def sampled_ranks(self) -> np.ndarray:
        return sampled_ranks(self.values())

    def pruned(self, start: int = 0) -> "Distribution":
        """Independent subframe chosen greedily at the base sample point."""
        if not self.frame:
            return self
        info = rank(self)
        if not info.regular:
            raise NotTotallyRegular(self.name or "distribution", info.ranks)
        keep = greedy_independent(self.values()[0], start=start)
        if len(keep) != info.rank:
            raise NotTotallyRegular(self.name or "distribution (pivoting)", info.ranks)
        if len(keep) == len(self.frame):
            return self
        return Distribution([self.frame[i] for i in keep], self.chart, self.name)

    def contains(self, fields) -> bool:
        """True if every field lies in the span of this distribution."""
        fields = list(fields.frame if isinstance(fields, Distribution) else fields)
        if not fields:
            return True
        base = self.sampled_ranks()
        both = Distribution(self.frame + tuple(fields), self.chart).sampled_ranks()
        return bool(np.all(both == base))


@dataclass(frozen=True)
class RankInfo:
    """Sampled rank of a distribution."""

    rank: int
    regular: bool
    ranks: tuple


def rank(D: Distribution) -> RankInfo:
    """Sampled rank of the frame with a total-regularity flag."""
    if D._rank is None:
        r = D.sampled_ranks()
        D._rank = RankInfo(int(r.max()) if len(r) else 0, bool(np.all(r == r[0])) if len(r)
                           else True, tuple(int(x) for x in r))
    return D._rank


def same_span(A: Distribution, B: Distribution) -> bool:
    """Pointwise equality of spans at the samples."""
    ra, rb = A.sampled_ranks(), B.sampled_ranks()
    rab = (A + B).sampled_ranks()
    return bool(np.all(ra == rab) and np.all(rb == rab))


class _BracketCache:
    def __init__(self):
        self.table = {}

    def get(self, X, Y):
        key = (id(X), id(Y))
        hit = self.table.get(key)
        if hit is None:
            hit = (X, Y, lie_bracket(X, Y))
            self.table[key] = hit
        return hit[2]


def derived_step(D: Distribution, cache: _BracketCache | None = None) -> Distribution:
    """First derived bundle, pruned so that the frame of ``D`` stays a prefix."""
    cache = cache or _BracketCache()
    X = D.frame
    brs = [cache.get(X[i], X[j]) for i in range(len(X)) for j in range(i + 1, len(X))]
    cand = Distribution(X + tuple(brs), D.chart)
    info = rank(cand)
    if not info.regular:
        raise NotTotallyRegular("derived bundle", info.ranks)
    keep = greedy_independent(cand.values()[0], start=len(X))
    if len(keep) != info.rank:
        raise NotTotallyRegular("derived bundle (pivoting)", info.ranks)
    return Distribution([cand.frame[i] for i in keep], D.chart)


def derived_flag(D: Distribution, max_levels: int = 64) -> list:
    """Derived flag ``D = V^(0) < V^(1) < ... < V^(k)``, stopping when stable.

    Each level's frame extends the previous level's frame, so that
    ``V^(j-1)`` is spanned by the first ``m_{j-1}`` fields of ``V^(j)``.

    Raises
    ------
    NotTotallyRegular
        With the offending level index in the message.
    """
    info = rank(D)
    if not info.regular:
        raise NotTotallyRegular("flag level 0", info.ranks)
    levels = [D.pruned()]
    cache = _BracketCache()
    while len(levels) <= max_levels:
        cur = levels[-1]
        try:
            nxt = derived_step(cur, cache)
        except NotTotallyRegular as exc:
            raise NotTotallyRegular(f"flag level {len(levels)}", exc.ranks) from None
        if len(nxt) == len(cur):
            break
        levels.append(nxt)
    for j, L in enumerate(levels):
        L.name = L.name or f"V^({j})"
    return levels


class PfaffianSystem:
    """Ordered list of one-forms on a chart."""

    def __init__(self, forms, chart: Chart | None = None, name: str = ""):
        forms = tuple(forms)
        if chart is None:
            if not forms:
                raise ValueError("an empty Pfaffian system needs an explicit chart")
            chart = forms[0].chart
        for w in forms:
            if not chart.compatible(w.chart):
                raise ChartMismatchError("forms must share the chart")
        self.chart = chart
        self.forms = forms
        self.name = name

    def __len__(self):
        return len(self.forms)

    def __iter__(self):
        return iter(self.forms)

    def __repr__(self):
        return f"PfaffianSystem({len(self.forms)} forms)"

    def values(self) -> np.ndarray:
        s = self.chart.points.shape[0]
        q, n = len(self.forms), self.chart.dim
        if q == 0:
            return np.zeros((s, 0, n))
        flat = self.chart.values([c for w in self.forms for c in w.comps])
        return flat.reshape(q, n, s).transpose(2, 0, 1).copy()

    def sampled_ranks(self) -> np.ndarray:
        return sampled_ranks(self.values())

    def annihilates(self, D: Distribution) -> bool:
        return all(self.chart.is_zero(w(X)) for w in self.forms for X in D.frame)

    def matrix(self) -> SymbolicMatrix:
        return SymbolicMatrix([list(w.comps) for w in self.forms], self.values())


def _frame_matrix(D: Distribution) -> SymbolicMatrix:
    return SymbolicMatrix([list(X.comps) for X in D.frame], D.values())


def annihilator(D: Distribution) -> PfaffianSystem:
    """Pointwise annihilator of ``D`` (forms vanishing on every frame field)."""
    info = rank(D)
    if not info.regular:
        raise NotTotallyRegular(D.name or "distribution", info.ranks)
    chart = D.chart
    if not D.frame:
        return PfaffianSystem([chart.differential(v) for v in chart.variables], chart)
    vecs, _ = _frame_matrix(D).nullspace()
    return PfaffianSystem([OneForm(chart, v) for v in vecs], chart)


def co_annihilator(P: PfaffianSystem) -> Distribution:
    """Distribution of vectors killed by every form of ``P``."""
    chart = P.chart
    if not P.forms:
        return Distribution([chart.coordinate_field(v) for v in chart.variables], chart)
    ranks = P.sampled_ranks()
    if not np.all(ranks == ranks[0]):
        raise NotTotallyRegular(P.name or "Pfaffian system", ranks)
    vecs, _ = P.matrix().nullspace()
    return Distribution([VectorField(chart, v) for v in vecs], chart)


def _combine(D: Distribution, coeff_vectors, width) -> list:
    out = []
    for a in coeff_vectors:
        comps = []
        for c in range(D.chart.dim):
            terms = [mul(a[i], D.frame[i].comps[c]) for i in range(width)
                     if a[i] is not ZERO and D.frame[i].comps[c] is not ZERO]
            comps.append(add(*terms))
        out.append(VectorField(D.chart, comps))
    return out


def cauchy_characteristics(D: Distribution, within: int | None = None,
                           forms: PfaffianSystem | None = None,
                           cache: _BracketCache | None = None) -> Distribution:
    """Cauchy characteristics ``{X in D : [X, D] in D}``.

    Parameters
    ----------
    D : Distribution
        Should have an independent frame (use :meth:`Distribution.pruned`).
    within : int, optional
        Restrict to combinations of the first ``within`` frame fields, which
        computes ``span(frame[:within]) ∩ ch D``.
    forms : PfaffianSystem, optional
        Precomputed annihilator of ``D``.
    """
    D = D.pruned()
    r = len(D.frame)
    p = r if within is None else within
    theta = forms if forms is not None else annihilator(D)
    if not theta.forms:
        return Distribution(D.frame[:p], D.chart)
    cache = cache or _BracketCache()
    X = D.frame
    br = {}
    for i in range(r):
        for j in range(i + 1, r):
            br[(i, j)] = cache.get(X[i], X[j])
    rows = []
    for l in range(r):
        for w in theta.forms:
            row = []
            for i in range(p):
                if i == l:
                    row.append(ZERO)
                elif i < l:
                    row.append(w(br[(i, l)]))
                else:
                    row.append(mul(-1, w(br[(l, i)])))
            rows.append(row)
    chart = D.chart
    flat = chart.values([e for row in rows for e in row])
    s = chart.points.shape[0]
    vals = flat.reshape(len(rows), p, s).transpose(2, 0, 1)
    Cm = SymbolicMatrix(rows, vals)
    ranks = Cm.ranks()
    if not np.all(ranks == ranks[0]):
        raise NotTotallyRegular("Cauchy characteristic system", ranks)
    vecs, _ = Cm.nullspace()
    return Distribution(_combine(D, vecs, p), chart)


def intersect(A: Distribution, B: Distribution) -> Distribution:
    """Pointwise intersection of two distributions."""
    if not A.chart.compatible(B.chart):
        raise ChartMismatchError("distributions live on different charts")
    A = A.pruned()
    theta = annihilator(B)
    if not theta.forms or not A.frame:
        return A
    rows = [[w(X) for X in A.frame] for w in theta.forms]
    chart = A.chart
    flat = chart.values([e for row in rows for e in row])
    s = chart.points.shape[0]
    vals = flat.reshape(len(rows), len(A.frame), s).transpose(2, 0, 1)
    Cm = SymbolicMatrix(rows, vals)
    ranks = Cm.ranks()
    if not np.all(ranks == ranks[0]):
        raise NotTotallyRegular("intersection", ranks)
    vecs, _ = Cm.nullspace()
    return Distribution(_combine(A, vecs, len(A.frame)), chart)


def is_integrable(D: Distribution) -> bool:
    """Frobenius test: brackets of frame fields stay in the span."""
    D = D.pruned()
    X = D.frame
    brs = [lie_bracket(X[i], X[j]) for i in range(len(X)) for j in range(i + 1, len(X))]
    return D.contains(brs)


def is_first_integral(f, D: Distribution) -> bool:
    """True iff every frame field annihilates ``f``."""
    f = D.chart.check_expr(f)
    return all(D.chart.is_zero(apply(X, f)) for X in D.frame)


def change_coordinates(X: VectorField, psi: dict, new_chart: Chart) -> VectorField:
    """Express ``X`` in new coordinates ``y`` given old ones as ``x = psi(y)``.

    The result ``Y`` satisfies ``Dpsi(y) Y(y) = X(psi(y))``.
    """
    old = X.chart
    m = {v: new_chart.check_expr(psi[v]) for v in old.variables}
    target = subs_many(list(X.comps), m)
    J = [[diff(m[v], w) for w in new_chart.variables] for v in old.variables]
    from .linalg import solve

    s = new_chart.points.shape[0]
    n = new_chart.dim
    Jv = new_chart.values([e for row in J for e in row]).reshape(n, n, s).transpose(2, 0, 1)
    bv = new_chart.values(target).T
    sol = solve(J, target, Jv, bv)
    if sol is None:
        raise ValueError("coordinate change is singular at the base sample")
    return VectorField(new_chart, sol, X.name)
