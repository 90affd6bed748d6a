"""Symmetry reduction and reconstruction of Pfaffian control systems.

Generators, invariants, group actions and cross-sections are supplied by
the caller; every one of them is verified at sample points before use.
The quotient is built by pulling the semi-basic forms back along the
cross-section, and trajectories are reconstructed from quotient solutions
by reducing the group-parameter equation to quadratures.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .diffgeo import (Chart, ChartMismatchError, Distribution, NotTotallyRegular, OneForm,
                      PfaffianSystem, VectorField, annihilator, apply, co_annihilator, derived_step,
                      is_first_integral, lie_bracket, same_span)
from .goursat import GoursatReport, classify_relative_goursat, esft_conditions
from .linalg import SymbolicMatrix, greedy_independent, sampled_ranks
from .symexpr import (ADD, CONST, MUL, ONE, ZERO, Expr, Program, add, as_expr, diff, mul,
                      neg, parse_expr, render, simplify, subs, subs_many, var)

NOT_REDUCED = "NOT-REDUCED-TO-QUADRATURE"


class ReductionError(ValueError):
    """A supplied generator, invariant, action or section failed verification."""


# ---------------------------------------------------------------------------
# symmetry algebras
# ---------------------------------------------------------------------------

def is_symmetry(X: VectorField, D: Distribution) -> bool:
    """True if ``[X, D]`` stays inside ``D`` at every sample point."""
    return D.contains([lie_bracket(X, Y) for Y in D.frame])


class SymmetryAlgebra:
    """Finite-dimensional algebra of infinitesimal symmetries.

    Parameters
    ----------
    fields : sequence of VectorField
    names : sequence of str, optional
    target : Distribution, optional
        When given, every generator is verified to be a symmetry of it.

    Attributes
    ----------
    structure : numpy.ndarray
        ``c[i, j, k]`` with ``[X_i, X_j] = sum_k c[i, j, k] X_k``.
    """

    def __init__(self, fields, names=None, target: Distribution | None = None,
                 tol: float = 1e-8):
        self.fields = tuple(fields)
        if not self.fields:
            raise ValueError("a symmetry algebra needs at least one generator")
        self.chart = self.fields[0].chart
        self.names = tuple(names) if names else tuple(f"X{i + 1}" for i in range(len(self.fields)))
        self.tol = tol
        if target is not None:
            for n, X in zip(self.names, self.fields):
                if not is_symmetry(X, target):
                    raise ReductionError(f"{n} is not a symmetry of the distribution")
        self.structure = self._structure_constants()

    @property
    def dim(self) -> int:
        return len(self.fields)

    def distribution(self) -> Distribution:
        return Distribution(self.fields, self.chart, "Gamma")

    def _structure_constants(self) -> np.ndarray:
        r = self.dim
        G = self.distribution().values()          # (s, r, n)
        if not np.all(sampled_ranks(G) == r):
            raise ReductionError("generators are not pointwise independent (action not free)")
        c = np.zeros((r, r, r))
        for i in range(r):
            for j in range(i + 1, r):
                B = Distribution([lie_bracket(self.fields[i], self.fields[j])], self.chart)
                b = B.values()[:, 0, :]            # (s, n)
                coef = np.array([np.linalg.lstsq(G[k].T, b[k], rcond=None)[0]
                                 for k in range(G.shape[0])])
                resid = np.einsum("sr,srn->sn", coef, G) - b
                scale = 1.0 + np.abs(b).max()
                if np.abs(resid).max() > self.tol * scale:
                    raise ReductionError(f"[{self.names[i]}, {self.names[j]}] is not in the span")
                if np.ptp(coef, axis=0).max() > self.tol * (1.0 + np.abs(coef).max()):
                    raise ReductionError(f"[{self.names[i]}, {self.names[j]}] has non-constant "
                                         "structure functions")
                mean = coef.mean(axis=0)
                mean[np.abs(mean) < self.tol] = 0.0
                c[i, j] = mean
                c[j, i] = -mean
        return c

    @property
    def is_abelian(self) -> bool:
        return bool(np.all(np.abs(self.structure) < self.tol))

    def derived_series(self) -> list:
        """Dimensions of the derived series, ending when it stabilizes."""
        dims = [self.dim]
        basis = np.eye(self.dim)
        while True:
            vecs = [np.einsum("i,j,ijk->k", a, b, self.structure)
                    for a in basis for b in basis]
            M = np.array(vecs) if vecs else np.zeros((0, self.dim))
            if M.size == 0 or np.abs(M).max() < self.tol:
                dims.append(0)
                return dims
            u, s, vt = np.linalg.svd(M)
            rk = int(np.sum(s > self.tol * s[0]))
            if rk == dims[-1]:
                return dims
            dims.append(rk)
            basis = vt[:rk]

    @property
    def is_solvable(self) -> bool:
        return self.derived_series()[-1] == 0


def is_admissible(G: SymmetryAlgebra, D: Distribution | None = None) -> bool:
    """Time-preserving generators whose ``(t, x)`` projection has full rank."""
    chart = G.chart
    if chart.time is None:
        raise ValueError("the chart declares no time variable")
    ti = chart.index[chart.time]
    if not all(chart.is_zero(X.comps[ti]) for X in G.fields):
        return False
    cols = [chart.index[v] for v in (chart.time,) + chart.states]
    V = G.distribution().values()[:, :, cols]
    if not np.all(sampled_ranks(V) == G.dim):
        return False
    if D is not None:
        return all(is_symmetry(X, D) for X in G.fields)
    return True


def is_transverse(G: SymmetryAlgebra, D: Distribution, derived: bool = False) -> bool:
    """``Gamma ∩ D = 0`` pointwise (or against ``D^(1)`` when ``derived``)."""
    target = derived_step(D.pruned()) if derived else D.pruned()
    both = Distribution(target.frame + G.fields, D.chart).sampled_ranks()
    return bool(np.all(both == len(target.frame) + G.dim))


def is_free(G: SymmetryAlgebra) -> bool:
    """Pointwise independence of the generators at the samples."""
    return bool(np.all(G.distribution().sampled_ranks() == G.dim))


def semi_basic_forms(P: PfaffianSystem, G: SymmetryAlgebra) -> PfaffianSystem:
    """Combinations of the forms of ``P`` that annihilate every generator."""
    chart = P.chart
    q, r = len(P.forms), G.dim
    if r == 0:
        return P
    if q - r <= 0:
        raise ReductionError("rank deficiency: no room for semi-basic forms")
    rows = [[w(X) for w in P.forms] for X in G.fields]
    s = chart.points.shape[0]
    vals = chart.values([e for row in rows for e in row]).reshape(r, q, s).transpose(2, 0, 1)
    vecs, _ = SymbolicMatrix(rows, vals).nullspace()
    out = []
    for c in vecs:
        comps = []
        for j in range(chart.dim):
            comps.append(add(*(mul(c[i], P.forms[i].comps[j]) for i in range(q)
                               if c[i] is not ZERO and P.forms[i].comps[j] is not ZERO)))
        out.append(OneForm(chart, comps))
    sb = PfaffianSystem(out, chart, "semi-basic")
    if not np.all(sb.sampled_ranks() == q - r):
        raise ReductionError("semi-basic forms have unexpected rank")
    return sb


# ---------------------------------------------------------------------------
# group actions
# ---------------------------------------------------------------------------

class GroupAction:
    """Explicit local action ``mu(eps, m)`` of an ``r``-parameter group.

    Parameters
    ----------
    chart : Chart
    params : sequence of str
        Names of the group parameters ``eps_1 .. eps_r`` (not chart variables).
    components : dict
        Chart variable to the transformed coordinate (expression in the chart
        variables and the parameters); unlisted variables are fixed.
    """

    def __init__(self, chart: Chart, params, components: dict):
        self.chart = chart
        self.params = tuple(params)
        clash = set(self.params) & set(chart.variables)
        if clash:
            raise ValueError(f"group parameters clash with chart variables: {sorted(clash)}")
        allowed = set(chart.variables) | set(self.params)
        comps = []
        for v in chart.variables:
            e = components.get(v, var(v))
            e = parse_expr(e) if isinstance(e, str) else as_expr(e)
            extra = e.free - allowed
            if extra:
                raise ReductionError(f"action component for {v} uses {sorted(extra)}")
            comps.append(e)
        self.components = tuple(comps)

    @property
    def dim(self) -> int:
        return len(self.params)

    def generators(self) -> list:
        """``d mu / d eps_a`` at ``eps = 0`` as vector fields."""
        zero = {p: ZERO for p in self.params}
        return [VectorField(self.chart, [subs(diff(c, p), zero) for c in self.components])
                for p in self.params]

    def verify(self, G: SymmetryAlgebra | None = None) -> None:
        """Identity and infinitesimal-generator checks.

        Raises
        ------
        ReductionError
        """
        chart = self.chart
        zero = {p: ZERO for p in self.params}
        for v, c in zip(chart.variables, self.components):
            if not chart.is_zero(add(subs(c, zero), neg(var(v)))):
                raise ReductionError(f"mu(0, m) != m in component {v}")
        if G is not None:
            if G.dim != self.dim:
                raise ReductionError("action and algebra dimensions differ")
            for a, (X, Y) in enumerate(zip(G.fields, self.generators())):
                for i in range(chart.dim):
                    if not chart.is_zero(add(X.comps[i], neg(Y.comps[i]))):
                        raise ReductionError(
                            f"d mu/d {self.params[a]} at 0 differs from {G.names[a]} "
                            f"in component {chart.variables[i]}")

    def composes_additively(self, n: int = 5, seed: int = 0) -> bool:
        """Sampled check of ``mu(e, mu(e', m)) = mu(e + e', m)`` (abelian actions)."""
        chart = self.chart
        rng = np.random.default_rng(seed)
        names = list(chart.variables) + list(self.params)
        prog = Program(self.components, names)
        for _ in range(n):
            m = chart.points[rng.integers(len(chart.points))]
            e1 = rng.uniform(-0.5, 0.5, self.dim)
            e2 = rng.uniform(-0.5, 0.5, self.dim)
            inner = prog(np.concatenate([m, e2])[None, :])[:, 0]
            lhs = prog(np.concatenate([inner, e1])[None, :])[:, 0]
            rhs = prog(np.concatenate([m, e1 + e2])[None, :])[:, 0]
            if not np.allclose(lhs, rhs, rtol=1e-9, atol=1e-12):
                return False
        return True


# ---------------------------------------------------------------------------
# quotients
# ---------------------------------------------------------------------------

@dataclass
class QuotientSystem:
    """Quotient control system with its quotient map and cross-section.

    Attributes
    ----------
    chart : Chart
        Quotient chart (time, state invariants, control invariants).
    q : dict
        Quotient variable to its expression in the parent chart.
    section : dict
        Parent variable to its expression in the quotient variables.
    forms : PfaffianSystem
        Quotient Pfaffian system in solved form.
    distribution : Distribution
        Push-forward of the parent distribution.
    semi_basic : PfaffianSystem
        Semi-basic forms on the parent chart.
    """

    chart: Chart
    q: dict
    section: dict
    forms: PfaffianSystem
    distribution: Distribution
    semi_basic: PfaffianSystem
    parent: Chart = None
    group_dim: int = 0
    parent_forms: PfaffianSystem = None
    checks: dict = field(default_factory=dict)

    def form_strings(self) -> list:
        """Quotient forms rendered as ``dw - f*dt`` strings.

        Differentials are listed states first, then controls, then time.
        """
        ch = self.chart
        order = list(ch.states) + list(ch.controls) + ([ch.time] if ch.time else [])
        return [render_form(w, order) for w in self.forms.forms]


def _is_negative(c: Expr) -> bool:
    if c.kind == CONST:
        return c.value < 0
    if c.kind == MUL and c.args[0].kind == CONST:
        return c.args[0].value < 0
    if c.kind == ADD:
        return all(_is_negative(a) for a in c.args)
    return False


def render_form(w: OneForm, order=None) -> str:
    """Render a one-form as ``dx - f*dt`` with signs pulled out of coefficients."""
    order = list(order or w.chart.variables)
    s = ""
    for v in order:
        c = w.comps[w.chart.index[v]]
        if c is ZERO:
            continue
        c = simplify(c)
        negative = _is_negative(c)
        if negative:
            c = neg(c)
        if c is ONE:
            term = f"d{v}"
        elif c.kind == ADD:
            term = f"({render(c)})*d{v}"
        else:
            term = f"{render(c)}*d{v}"
        if not s:
            s = f"-{term}" if negative else term
        else:
            s += (" - " if negative else " + ") + term
    return s or "0"


def _freeze_variables(G: SymmetryAlgebra) -> list:
    """Parent state variables to freeze at zero for a transverse section."""
    chart = G.chart
    V = G.distribution().values()[0]            # (r, n)
    cand = [chart.index[v] for v in chart.states] + [chart.index[v] for v in chart.controls]
    keep = greedy_independent(V[:, cand].T)
    if len(keep) < G.dim:
        raise ReductionError("cannot find a coordinate cross-section transverse to the orbits")
    return [chart.variables[cand[i]] for i in keep[:G.dim]]


def _solve_section(parent: Chart, invariants: dict, frozen: list) -> dict:
    """Solve ``w_j = I_j(m)`` on ``{frozen = 0}`` by triangular linear elimination."""
    zero = {v: ZERO for v in frozen}
    eqs = {w: subs(I, zero) for w, I in invariants.items()}
    unknown = [v for v in parent.variables if v not in frozen]
    known = {}
    pending = dict(eqs)
    progress = True
    while pending and progress:
        progress = False
        for w, e in list(pending.items()):
            e = subs(e, known) if known else e
            free = [v for v in unknown if v in e.free and v not in known]
            if not free:
                raise ReductionError(f"invariant {w} is constant on the cross-section")
            if len(free) == 1:
                v = free[0]
                a = diff(e, v)
                if v in a.free:
                    continue
                b = subs(e, {v: ZERO})
                known[v] = simplify(mul(add(var(w), neg(b)), a ** -1))
                del pending[w]
                progress = True
    if pending or len(known) != len(unknown):
        raise ReductionError("elimination failure: invariants are not triangular on the "
                             "cross-section; supply the section explicitly")
    sec = {v: ZERO for v in frozen}
    sec.update(known)
    return {v: sec[v] for v in parent.variables}


def _classify_invariants(parent: Chart, invariants: dict):
    tx = set((parent.time,) + parent.states)
    states, controls, time = [], [], None
    for w, I in invariants.items():
        if parent.time is not None and I is var(parent.time):
            time = w
        elif I.free <= tx:
            states.append(w)
        else:
            controls.append(w)
    return time, states, controls


def quotient(D: Distribution, G: SymmetryAlgebra, invariants: dict,
             section: dict | None = None, forms: PfaffianSystem | None = None,
             domain=None, singular=()) -> QuotientSystem:
    """Quotient of a control system by a supplied symmetry algebra.

    Parameters
    ----------
    D : Distribution
        Parent distribution.
    G : SymmetryAlgebra
    invariants : dict
        Quotient variable name to its defining invariant (expression or
        string).  Include the time variable itself, e.g. ``{"t": "t", ...}``.
        If omitted, ``t`` is added automatically.
    section : dict, optional
        Parent variable to its expression in the quotient variables.  When
        omitted a section is built by freezing a transverse set of parent
        coordinates at zero and solving the invariants triangularly.
    forms : PfaffianSystem, optional
        Parent Pfaffian system; defaults to the annihilator of ``D``.
    domain : SampleDomain, optional
        Sample domain of the quotient chart.
    singular : sequence, optional
        Singular loci of the quotient chart.
    """
    parent = D.chart
    inv = {}
    if parent.time is not None and parent.time not in invariants:
        inv[parent.time] = var(parent.time)
    for w, I in invariants.items():
        inv[w] = parent.check_expr(I)
    n, r = parent.dim, G.dim
    if len(inv) != n - r:
        raise ReductionError(f"need {n - r} invariants, got {len(inv)}")
    for w, I in inv.items():
        if not is_first_integral(I, G.distribution()):
            raise ReductionError(f"{w} = {render(I)} is not invariant under the generators")
    grads = [[diff(I, v) for v in parent.variables] for I in inv.values()]
    s = parent.points.shape[0]
    J = parent.values([g for row in grads for g in row]).reshape(len(inv), n, s)
    if not np.all(sampled_ranks(J.transpose(2, 0, 1)) == n - r):
        raise ReductionError("invariants are functionally dependent")
    time, states, controls = _classify_invariants(parent, inv)
    qvars = ([time] if time else []) + states + controls
    qchart = Chart(qvars, time=time, states=states, controls=controls,
                   domain=domain or parent.domain,
                   singular=singular)
    if section is None:
        section = _solve_section(parent, inv, _freeze_variables(G))
    else:
        section = {v: (parse_expr(e) if isinstance(e, str) else as_expr(e))
                   for v, e in section.items()}
        for v in parent.variables:
            section.setdefault(v, var(v))
    for v, e in section.items():
        try:
            qchart.check_expr(e)
        except ChartMismatchError as exc:
            raise ReductionError(f"section component for {v}: {exc} (give every parent "
                                 "variable in terms of the quotient variables)") from None
    # q o sigma = identity
    sec_list = [section[v] for v in parent.variables]
    sm = dict(section)
    for w, I in inv.items():
        back = subs(I, sm)
        if not qchart.is_zero(add(back, neg(var(w)))):
            raise ReductionError(f"q o sigma != id in component {w}")
    P = forms if forms is not None else annihilator(D.pruned())
    sb = semi_basic_forms(P, G)
    # sigma^* of semi-basic forms
    dsec = [[diff(sv, w) for w in qvars] for sv in sec_list]
    rows = []
    for wf in sb.forms:
        coeffs = subs_many(list(wf.comps), sm)
        rows.append([add(*(mul(coeffs[i], dsec[i][j]) for i in range(n)
                           if coeffs[i] is not ZERO and dsec[i][j] is not ZERO))
                     for j in range(len(qvars))])
    # solved form: pivot on state columns first
    order = [qvars.index(v) for v in states + controls + ([time] if time else [])]
    vals = qchart.values([e for row in rows for e in row]).reshape(
        len(rows), len(qvars), qchart.points.shape[0]).transpose(2, 0, 1)
    R, RV, piv = SymbolicMatrix(rows, vals).rref(columns=order)
    qforms = PfaffianSystem([OneForm(qchart, [simplify(c) for c in row]) for row in R],
                            qchart, "quotient")
    # push-forward of the parent frame through the section
    pushed = []
    for X in D.frame:
        comps = [simplify(subs(apply(X, inv[w]), sm)) for w in qvars]
        pushed.append(VectorField(qchart, comps))
    qdist = Distribution(pushed, qchart, "quotient").pruned()
    Q = QuotientSystem(qchart, inv, section, qforms, qdist, sb, parent, r, P)
    Q.checks = quotient_checks(Q, D, G)
    return Q


def quotient_checks(Q: QuotientSystem, D: Distribution, G: SymmetryAlgebra) -> dict:
    """Sampled consistency checks of a constructed quotient.

    ``lemma``: the push-forward of ``D`` equals the kernel of the quotient
    forms.  ``pullback``: ``q^*`` of the quotient forms lies in the span of
    the semi-basic forms.  ``bookkeeping``: states drop by ``dim G`` and
    controls are preserved.
    """
    out = {}
    ker = co_annihilator(Q.forms)
    out["lemma"] = same_span(ker, Q.distribution)
    parent = Q.parent
    qv = list(Q.chart.variables)
    m = {w: Q.q[w] for w in qv}
    grads = {w: [diff(Q.q[w], v) for v in parent.variables] for w in qv}
    pulled = []
    for wf in Q.forms.forms:
        coeffs = subs_many(list(wf.comps), m)
        comps = [add(*(mul(coeffs[j], grads[qv[j]][i]) for j in range(len(qv))
                       if coeffs[j] is not ZERO and grads[qv[j]][i] is not ZERO))
                 for i in range(parent.dim)]
        pulled.append(OneForm(parent, comps))
    base = Q.semi_basic.sampled_ranks()
    both = PfaffianSystem(Q.semi_basic.forms + tuple(pulled), parent).sampled_ranks()
    out["pullback"] = bool(np.all(both == base))
    out["bookkeeping"] = (len(Q.chart.states) == len(parent.states) - G.dim
                          and len(Q.chart.controls) == len(parent.controls))
    return out


@dataclass
class QuotientReport:
    """Verdicts of the linearizable-quotient test (no quotient is built)."""

    goursat: GoursatReport
    esft: object
    admissible: bool
    transverse: bool
    transverse_derived: bool
    free: bool
    preconditions_ok: bool
    diagnostics: list = field(default_factory=list)


def check_linearizable_quotient(D: Distribution, G: SymmetryAlgebra) -> QuotientReport:
    """Relative Goursat test on ``D + Gamma`` plus the static-feedback conditions."""
    diags = []
    adm = is_admissible(G)
    tr = is_transverse(G, D)
    try:
        tr1 = is_transverse(G, D, derived=True)
    except NotTotallyRegular:
        tr1 = False
    fr = is_free(G)
    if not adm:
        diags.append("generators are not control admissible")
    if not tr:
        diags.append("generators are not transverse to the distribution")
    if not fr:
        diags.append("action is not free at the samples")
    Vhat = Distribution(D.frame + G.fields, D.chart, "V+Gamma")
    rep = classify_relative_goursat(Vhat)
    try:
        es = esft_conditions(D, G.fields)
    except NotTotallyRegular as exc:
        es = None
        diags.append(str(exc))
    return QuotientReport(rep, es, adm, tr, tr1, fr, adm and tr and fr, diags)


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------

def gauss_legendre(f: Callable, a: float, b: float, rtol: float = 1e-10,
                   atol: float = 1e-14, order: int = 10, max_depth: int = 40) -> float:
    """Adaptive composite Gauss-Legendre quadrature with interval bisection.

    ``f`` must accept a 1-D array of abscissae.  An interval is accepted when
    its single-panel estimate agrees with the two half-panel estimates to
    ``max(atol, rtol * |estimate|)``.
    """
    x, w = _nodes(order)

    def panel(lo, hi):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return half * float(np.dot(w, f(mid + half * x)))

    if a == b:
        return 0.0
    total = 0.0
    stack = [(a, b, panel(a, b), 0)]
    while stack:
        lo, hi, whole, depth = stack.pop()
        m = 0.5 * (lo + hi)
        left, right = panel(lo, m), panel(m, hi)
        est = left + right
        if abs(est - whole) <= max(atol, rtol * abs(est)) or depth >= max_depth:
            total += est
        else:
            stack.append((lo, m, left, depth + 1))
            stack.append((m, hi, right, depth + 1))
    return total


_NODE_CACHE = {}


def _nodes(order):
    if order not in _NODE_CACHE:
        _NODE_CACHE[order] = leggauss(order)
    return _NODE_CACHE[order]


@dataclass
class Reconstruction:
    """Reconstructed trajectory ``s(t) = mu(g(t), sigma(sbar(t)))``.

    Attributes
    ----------
    t : numpy.ndarray
    g : numpy.ndarray
        Shape ``(len(t), r)``.
    channels : dict
        Parent variable to sampled values.
    gdot : list of Expr
        Right-hand side of the group-parameter equation.
    status : str
        ``OK`` or ``NOT-REDUCED-TO-QUADRATURE``.
    ode : list of str
        Rendered raw equations when the system does not decouple.
    derivatives : dict
        Parent variable to sampled time derivative of its channel.
    residual : dict
        Form name to ``max |s^* omega|`` over the grid.
    quotient_error : float
        ``max |q(s(t)) - sbar(t)|`` over the grid.
    """

    t: np.ndarray
    g: Optional[np.ndarray]
    channels: dict
    gdot: list
    status: str = "OK"
    ode: list = field(default_factory=list)
    derivatives: dict = field(default_factory=dict)
    residual: dict = field(default_factory=dict)
    quotient_error: float = float("nan")

    @property
    def max_residual(self) -> float:
        return max(self.residual.values()) if self.residual else float("nan")


def lie_type_system(Q: QuotientSystem, action: GroupAction, forms: PfaffianSystem):
    """Equation ``gdot = F(t, g)`` imposed by ``s^* omega = 0``.

    Returns expressions in the parent chart variables (evaluated on the
    section), the symbols ``d_<v>`` for their time derivatives and the group
    parameters.
    """
    parent = Q.parent
    dnames = [f"d_{v}" for v in parent.variables]
    mu = action.components
    m_at = {v: mu[i] for i, v in enumerate(parent.variables)}
    # ds/dt = dmu/dm . m' + dmu/deps . g', with the forms evaluated at mu(eps, m)
    rows, rhs = [], []
    for w in forms.forms:
        wc = subs_many(list(w.comps), m_at)
        rows.append([add(*(mul(wc[i], diff(mu[i], p)) for i in range(parent.dim)
                           if wc[i] is not ZERO))
                     for p in action.params])
        rhs.append(add(*(mul(wc[i], diff(mu[i], v), var(dnames[j]))
                         for i in range(parent.dim) if wc[i] is not ZERO
                         for j, v in enumerate(parent.variables))))
    return rows, rhs, dnames


def reconstruct(Q: QuotientSystem, action: GroupAction, qsol: dict, t0: float, t1: float,
                n: int = 101, g0=None, forms: PfaffianSystem | None = None,
                rtol: float = 1e-10) -> Reconstruction:
    """Lift a quotient solution to the parent system.

    Parameters
    ----------
    Q : QuotientSystem
    action : GroupAction
    qsol : dict
        Quotient variable to a closed-form expression in the time variable,
        or to a pair of callables ``(value, derivative)`` of ``t``.
    t0, t1, n : float, float, int
        Output grid.
    g0 : sequence of float, optional
        Group parameters at ``t0`` (default zero).
    forms : PfaffianSystem, optional
        Parent Pfaffian system; defaults to the one used to build ``Q``.
    """
    parent = Q.parent
    tname = parent.time
    r = action.dim
    P = forms if forms is not None else Q.parent_forms
    rows, rhs, dnames = lie_type_system(Q, action, P)
    # solve A g' = -b with the group parameters and section point as symbols
    eps = list(action.params)
    aux_vars = list(parent.variables) + dnames + eps
    aux = Chart(aux_vars, time=None, domain=parent.domain)
    q = len(rows)
    flat = aux.values([e for row in rows for e in row] + list(rhs))
    s = aux.points.shape[0]
    Avals = flat[:q * r].reshape(q, r, s).transpose(2, 0, 1)
    bvals = flat[q * r:].reshape(q, s).T
    aug = [list(rows[i]) + [neg(rhs[i])] for i in range(q)]
    V = np.concatenate([Avals, -bvals[:, :, None]], axis=2)
    R, RV, piv = SymbolicMatrix(aug, V).rref(columns=range(r))
    if len(piv) < r:
        raise ReductionError("group-parameter equation is underdetermined")
    # consistency: rows beyond the pivots must be 0 = 0
    tgrid = np.linspace(t0, t1, n)
    path = _QuotientPath(Q, qsol, tname)
    g0 = np.zeros(r) if g0 is None else np.asarray(g0, dtype=float)
    gdot = [ZERO] * r
    for i, p in enumerate(piv):
        gdot[p] = R[i][r]
    if len(R) > r:
        extra = RV[:, r:, r]
        if np.abs(extra).max() > 1e-8 * (1.0 + np.abs(V).max()):
            raise ReductionError("s^* omega = 0 is inconsistent for this quotient solution")
    # quotient path -> section point and its derivative
    # Dependence on the group parameters is decided along the quotient path:
    # the rates are only required to agree with the true ones where the
    # quotient forms hold, and cancellations there need not be symbolic.
    deps = _path_dependence(gdot, eps, aux_vars, path, tgrid)
    gdot = [simplify(subs(e, {p: ZERO for p in eps if p not in deps[a]}))
            for a, e in enumerate(gdot)]
    prog = Program(gdot, aux_vars)

    def F(tt, gvals=None):
        tt = np.atleast_1d(np.asarray(tt, dtype=float))
        m, dm = path(tt)
        cols = [m, dm, np.zeros((len(tt), r)) if gvals is None else gvals]
        return prog(np.concatenate(cols, axis=1))

    if all(not d for d in deps):
        G = np.zeros((n, r))
        G[0] = g0
        for a in range(r):
            acc = g0[a]
            for k in range(1, n):
                acc += gauss_legendre(lambda x, a=a: F(x)[a], tgrid[k - 1], tgrid[k], rtol)
                G[k, a] = acc
        status = "OK"
    else:
        order = _triangular_order(deps, eps)
        if order is None:
            ode = [f"d{eps[a]}/dt = {render(simplify(gdot[a]))}" for a in range(r)]
            return Reconstruction(tgrid, None, {}, gdot, NOT_REDUCED, ode)
        G = _nested_quadrature(F, order, deps, eps, tgrid, g0, rtol)
        status = "OK"
    m, dm = path(tgrid)
    pv = list(parent.variables)
    mg = np.concatenate([m, G], axis=1)
    vals = Program(action.components, pv + eps)(mg)
    channels = {v: vals[i] for i, v in enumerate(pv)}
    # ds/dt by the chain rule through mu, with g' from the rate equations
    gd = F(tgrid, G).T
    jac = Program([diff(c, v) for c in action.components for v in pv + eps], pv + eps)(mg)
    jac = jac.reshape(len(pv), len(pv) + r, n)
    rates = np.concatenate([dm, gd], axis=1)
    dvals = np.einsum("ijs,sj->is", jac, rates)
    derivs = {v: dvals[i] for i, v in enumerate(pv)}
    rec = Reconstruction(tgrid, G, channels, gdot, status, derivatives=derivs)
    rec.residual = form_residuals(P, channels, derivs)
    back = Program(list(Q.q.values()), pv)(vals.T)
    target = path.quotient_values(tgrid)
    rec.quotient_error = float(np.abs(back - target).max())
    return rec


def form_residuals(P: PfaffianSystem, channels: dict, derivs: dict) -> dict:
    """``max |omega(s(t))(s'(t))|`` per form along a sampled curve."""
    ch = P.chart
    missing = [v for v in ch.variables if v not in channels]
    if missing:
        raise ReductionError(f"trajectory lacks channel(s) {missing}")
    X = np.stack([np.asarray(channels[v], dtype=float) for v in ch.variables], axis=1)
    dX = np.stack([np.asarray(derivs[v], dtype=float) for v in ch.variables], axis=1)
    out = {}
    for i, w in enumerate(P.forms):
        coeffs = Program(list(w.comps), list(ch.variables))(X)
        res = np.abs(np.einsum("vs,sv->s", coeffs, dX))
        out[w.name or f"omega{i + 1}"] = float(res.max())
    return out


def _path_dependence(gdot, eps, aux_vars, path, tgrid, probes: int = 9,
                     tol: float = 1e-9) -> list:
    """Group parameters each rate depends on, probed along the path."""
    tt = np.linspace(tgrid[0], tgrid[-1], probes)
    m, dm = path(tt)
    rng = np.random.default_rng(7919)
    G = rng.uniform(-1.0, 1.0, size=(probes, len(eps)))
    X = np.concatenate([m, dm, G], axis=1)
    deps = []
    for e in gdot:
        found = set()
        cand = [p for p in eps if p in e.free]
        if cand:
            vals = Program([diff(e, p) for p in cand] + [e], aux_vars)(X)
            scale = 1.0 + np.abs(vals[-1]).max()
            for p, v in zip(cand, vals[:-1]):
                if not np.all(np.isfinite(v)) or np.abs(v).max() > tol * scale:
                    found.add(p)
        deps.append(found)
    return deps


class _QuotientPath:
    """Section point ``sigma(sbar(t))`` and its time derivative on demand."""

    def __init__(self, Q: QuotientSystem, qsol: dict, tname: str):
        parent = Q.parent
        qv = list(Q.chart.variables)
        self.parent = parent
        self.exprs = {}
        self.funcs = {}
        for w in qv:
            if w == Q.chart.time:
                continue
            if w not in qsol:
                raise ReductionError(f"quotient solution lacks {w}")
            val = qsol[w]
            if callable(val) or (isinstance(val, tuple) and callable(val[0])):
                self.funcs[w] = val
            else:
                e = parse_expr(val) if isinstance(val, str) else as_expr(val)
                if e.free - {tname}:
                    raise ReductionError(f"quotient solution for {w} depends on {sorted(e.free)}")
                self.exprs[w] = e
        sec = [Q.section[v] for v in parent.variables]
        self.tname = tname
        self.qv = qv
        if not self.funcs:
            # fully symbolic: compose and differentiate in t
            m = {w: e for w, e in self.exprs.items()}
            comp = subs_many(sec, m)
            self.m_prog = Program(comp, [tname])
            self.dm_prog = Program([diff(c, tname) for c in comp], [tname])
            self.symbolic = True
        else:
            self.symbolic = False
            self.sec_prog = Program(sec, qv)
            jac = [diff(sv, w) for sv in sec for w in qv]
            self.jac_prog = Program(jac, qv)
            self.wexprs = {w: (Program([e], [tname]), Program([diff(e, tname)], [tname]))
                           for w, e in self.exprs.items()}

    def quotient_values(self, tt):
        """``sbar(t)`` as an array of shape ``(len(qv), len(t))``."""
        tt = np.asarray(tt, dtype=float)
        rows = []
        for w in self.qv:
            if w == self.tname:
                rows.append(tt)
            elif w in self.funcs:
                f = self.funcs[w]
                rows.append(np.asarray((f[0] if isinstance(f, tuple) else f)(tt), dtype=float))
            else:
                rows.append(Program([self.exprs[w]], [self.tname])(tt[:, None])[0])
        return np.array(rows)

    def __call__(self, tt):
        tt = np.asarray(tt, dtype=float)
        if self.symbolic:
            return self.m_prog(tt[:, None]).T, self.dm_prog(tt[:, None]).T
        W = np.zeros((len(tt), len(self.qv)))
        dW = np.zeros_like(W)
        for j, w in enumerate(self.qv):
            if w == self.tname:
                W[:, j] = tt
                dW[:, j] = 1.0
            elif w in self.funcs:
                f = self.funcs[w]
                val, der = f if isinstance(f, tuple) else (f, None)
                W[:, j] = val(tt)
                dW[:, j] = der(tt) if der is not None else _central(val, tt)
            else:
                p, dp = self.wexprs[w]
                W[:, j] = p(tt[:, None])[0]
                dW[:, j] = dp(tt[:, None])[0]
        m = self.sec_prog(W).T
        J = self.jac_prog(W).T.reshape(len(tt), len(self.parent.variables), len(self.qv))
        return m, np.einsum("svw,sw->sv", J, dW)


def _central(f, t, h=1e-4):
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


def _triangular_order(deps, eps):
    """Order in which each rate depends only on already-known parameters."""
    r = len(eps)
    idx = {p: i for i, p in enumerate(eps)}
    order, done = [], set()
    while len(order) < r:
        nxt = [a for a in range(r) if a not in done
               and all(idx[p] in done for p in deps[a])]
        if not nxt:
            return None
        order.append(nxt[0])
        done.add(nxt[0])
    return order


def _nested_quadrature(F, order, deps, eps, tgrid, g0, rtol):
    """Sequential quadrature for a triangular rate system."""
    r = len(eps)
    n = len(tgrid)
    G = np.zeros((n, r))
    G[0] = g0
    known = {}

    def g_at(a, x):
        x = np.atleast_1d(x)
        out = np.empty(len(x))
        for i, xi in enumerate(x):
            out[i] = g0[a] + gauss_legendre(lambda y: rate(a, y), tgrid[0], xi, rtol)
        return out

    def rate(a, x):
        x = np.atleast_1d(x)
        gv = np.zeros((len(x), r))
        for b in known:
            gv[:, b] = g_at(b, x)
        return F(x, gv)[a]

    for a in order:
        acc = g0[a]
        for k in range(1, n):
            acc += gauss_legendre(lambda x: rate(a, x), tgrid[k - 1], tgrid[k], rtol)
            G[k, a] = acc
        known[a] = True
    return G
