"""Goursat bundle recognition and contact coordinates.

The classification pipeline computes the derived flag of a distribution,
the Cauchy characteristics of every level and the intersections
``V^(j-1) ∩ ch V^(j)``; the sampled dimensions form the refined derived
type.  A partial-prolongation type check, per-level integrability tests and
(when the last velocity exceeds one) the resolvent bundle of the Weber level
then decide whether the distribution is locally a Brunovsky normal form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diffgeo import (Distribution, NotTotallyRegular, VectorField, _BracketCache,
                      annihilator, apply, cauchy_characteristics, derived_flag,
                      derived_step, is_first_integral, is_integrable, lie_bracket, rank)
from .linalg import SymbolicMatrix, sampled_ranks
from .symexpr import ZERO, Expr, add, as_expr, mul, var

OUT_OF_SCOPE = "OUT-OF-THEOREM-SCOPE"


@dataclass(frozen=True)
class RefinedDerivedType:
    """Refined derived type ``[[m0, c0], [m1, c1_0, c1], ..., [mk, ck]]``.

    Attributes
    ----------
    m : tuple of int
        Flag dimensions ``m_j``.
    chi : tuple of int
        Cauchy dimensions ``chi^j`` for ``0 <= j <= k``.
    chi_int : tuple of int
        Intersection dimensions ``chi^j_{j-1}`` for ``1 <= j <= k-1``
        (entry ``j-1`` holds level ``j``).
    dim : int or None
        Dimension of the ambient manifold when known.
    """

    m: tuple
    chi: tuple
    chi_int: tuple
    dim: Optional[int] = None

    @property
    def k(self) -> int:
        return len(self.m) - 1

    def levels(self) -> list:
        k = self.k
        if k == 0:
            return [[self.m[0], self.chi[0]]]
        out = [[self.m[0], self.chi[0]]]
        for j in range(1, k):
            out.append([self.m[j], self.chi_int[j - 1], self.chi[j]])
        out.append([self.m[k], self.chi[k]])
        return out

    @classmethod
    def from_levels(cls, levels, dim=None) -> "RefinedDerivedType":
        m = tuple(int(L[0]) for L in levels)
        chi = tuple(int(L[-1]) for L in levels)
        chi_int = tuple(int(L[1]) for L in levels[1:-1])
        return cls(m, chi, chi_int, dim)

    def __str__(self):
        return str(self.levels())


@dataclass(frozen=True)
class Signature:
    """Deceleration ``<rho_1, ..., rho_k>`` and velocity ``<Delta_1, ..., Delta_k>``."""

    decel: tuple
    velocity: tuple

    def __str__(self):
        return "<" + ",".join(str(r) for r in self.decel) + ">"


def velocity(rdt: RefinedDerivedType) -> tuple:
    return tuple(rdt.m[j] - rdt.m[j - 1] for j in range(1, len(rdt.m)))


def deceleration(rdt: RefinedDerivedType) -> Signature:
    """Velocity and deceleration of a refined derived type."""
    d = velocity(rdt)
    k = len(d)
    rho = tuple(d[j] - d[j + 1] for j in range(k - 1)) + ((d[-1],) if k else ())
    return Signature(rho, d)


def expected_type(decel, c: int = 0) -> RefinedDerivedType:
    """Type numbers of the partial prolongation with deceleration ``decel``.

    All dimensions are shifted by ``c`` (a Cauchy bundle of rank ``c``).
    """
    rho = tuple(int(r) for r in decel)
    k = len(rho)
    delta = [sum(rho[i:]) for i in range(k)]
    q = delta[0] if k else 0
    m = [q + 1 + c]
    for d in delta:
        m.append(m[-1] + d)
    chi = [2 * m[j] - m[j + 1] - 1 for j in range(k)] + [m[k]]
    chi_int = [m[j - 1] - 1 for j in range(1, k)]
    return RefinedDerivedType(tuple(m), tuple(chi), tuple(chi_int), m[k])


def matches_partial_prolongation(rdt: RefinedDerivedType, relative: bool = False,
                                 dim: Optional[int] = None) -> Optional[Signature]:
    """Signature if the type numbers are those of a partial prolongation.

    In the relative case every type number may be shifted by the rank
    ``c = chi^0`` of the Cauchy bundle; otherwise ``chi^0`` must vanish.
    """
    k = rdt.k
    if k < 1:
        return None
    sig = deceleration(rdt)
    if any(r < 0 for r in sig.decel) or sig.decel[-1] < 1:
        return None
    m, chi = rdt.m, rdt.chi
    if not relative and chi[0] != 0:
        return None
    for j in range(k):
        if chi[j] != 2 * m[j] - m[j + 1] - 1:
            return None
    for i in range(1, k):
        if rdt.chi_int[i - 1] != m[i - 1] - 1:
            return None
    dim = dim if dim is not None else rdt.dim
    if dim is not None and m[k] != dim:
        return None
    if chi[k] != m[k]:
        return None
    return sig


class FlagAnalysis:
    """Derived flag with its Cauchy bundles and intersections.

    Attributes
    ----------
    flag : list of Distribution
        ``V^(0), ..., V^(k)`` with nested frames.
    ch : list of Distribution
        ``ch V^(j)`` for each level.
    ch_int : dict
        ``j -> V^(j-1) ∩ ch V^(j)`` for ``1 <= j <= k-1``.
    rdt : RefinedDerivedType
    """

    def __init__(self, D: Distribution):
        self.distribution = D
        self.flag = derived_flag(D)
        self.cache = _BracketCache()
        self.forms = []
        self.ch = []
        self.ch_int = {}
        k = len(self.flag) - 1
        for j, L in enumerate(self.flag):
            theta = annihilator(L)
            self.forms.append(theta)
            try:
                self.ch.append(cauchy_characteristics(L, forms=theta, cache=self.cache))
            except NotTotallyRegular as exc:
                raise NotTotallyRegular(f"ch V^({j})", exc.ranks) from None
            if 1 <= j <= k - 1:
                p = len(self.flag[j - 1])
                try:
                    self.ch_int[j] = cauchy_characteristics(L, within=p, forms=theta,
                                                             cache=self.cache)
                except NotTotallyRegular as exc:
                    raise NotTotallyRegular(f"ch V^({j})_{j - 1}", exc.ranks) from None
        self.rdt = RefinedDerivedType(
            tuple(len(L) for L in self.flag),
            tuple(_checked_rank(c, f"ch V^({j})") for j, c in enumerate(self.ch)),
            tuple(_checked_rank(self.ch_int[j], f"ch V^({j})_{j - 1}") for j in range(1, k)),
            D.chart.dim,
        )

    @property
    def k(self) -> int:
        return len(self.flag) - 1


def _checked_rank(D: Distribution, where: str) -> int:
    info = rank(D)
    if not info.regular:
        raise NotTotallyRegular(where, info.ranks)
    if len(D.frame) != info.rank:
        raise NotTotallyRegular(where + " (frame)", info.ranks)
    return info.rank


def analyze(D: Distribution) -> FlagAnalysis:
    """Cached :class:`FlagAnalysis` of ``D``."""
    an = getattr(D, "_analysis", None)
    if an is None:
        an = FlagAnalysis(D)
        D._analysis = an
    return an


def refined_derived_type(D: Distribution) -> RefinedDerivedType:
    """Refined derived type of ``D`` (see :class:`FlagAnalysis`)."""
    return analyze(D).rdt


# ---------------------------------------------------------------------------
# polar matrix and resolvent
# ---------------------------------------------------------------------------

def _structure_tensors(D: Distribution, theta, cache=None):
    cache = cache or _BracketCache()
    X = D.frame
    r = len(X)
    S = []
    for w in theta.forms:
        M = [[ZERO] * r for _ in range(r)]
        for a in range(r):
            for b in range(a + 1, r):
                e = w(cache.get(X[a], X[b]))
                M[a][b] = e
                M[b][a] = mul(-1, e)
        S.append(M)
    return S


def polar_matrix(D: Distribution, direction) -> list:
    """Polar matrix of the direction ``sum_i a_i X_i``.

    Rows are indexed by the frame of ``D`` and columns by the annihilating
    forms (coordinates on ``TM/D``).  Entries are linear in the
    coefficients ``a_i`` (expressions, possibly symbols outside the chart).
    """
    D = D.pruned()
    theta = annihilator(D)
    S = _structure_tensors(D, theta)
    a = [as_expr(v) for v in direction]
    r = len(D.frame)
    if len(a) != r:
        raise ValueError("direction needs one coefficient per frame field")
    return [[add(*(mul(a[i], S[k][i][j]) for i in range(r))) for k in range(len(S))]
            for j in range(r)]


@dataclass
class ResolventResult:
    """Outcome of the Weber-structure test on one flag level."""

    bundle: Optional[Distribution]
    weber: bool
    integrable: bool
    rank: int = 0
    cauchy_rank: int = 0
    q: int = 0
    reason: str = ""


def _lambda_vectors(q: int, count: int = 3):
    rng = np.random.default_rng(7919)
    out = []
    for _ in range(count):
        v = rng.integers(1, 10, size=q) * rng.choice([-1, 1], size=q)
        out.append([int(x) for x in v])
    return out


def resolvent_bundle(D: Distribution) -> ResolventResult:
    """Resolvent bundle of a level with Weber shape, with integrability verdict.

    The structure tensor components ``theta^k([X_a, X_b])`` are combined
    with fixed generic weights; each combination must have rank two, and
    the span of the kernels of two combinations is the candidate resolvent.
    A third combination checks that the singular locus is linear, and the
    candidate must be isotropic with generic polar rank ``q``.
    """
    D = D.pruned()
    chart = D.chart
    n, r = chart.dim, len(D.frame)
    q = n - r
    theta = annihilator(D)
    ch = cauchy_characteristics(D, forms=theta)
    c = len(ch.frame)
    if q < 2 or r != c + q + 1 or n != c + 2 * q + 1:
        return ResolventResult(None, False, False, 0, c, q, "NOT-WEBER: shape")
    if len(derived_step(D).frame) != n:
        return ResolventResult(None, False, False, 0, c, q, "NOT-WEBER: V^(1) != TM")
    S = _structure_tensors(D, theta)
    s = chart.points.shape[0]

    def combo(lam):
        E = [[add(*(mul(lam[k], S[k][a][b]) for k in range(q))) for b in range(r)]
             for a in range(r)]
        vals = chart.values([e for row in E for e in row]).reshape(r, r, s).transpose(2, 0, 1)
        return SymbolicMatrix(E, vals)

    kernels = []
    for lam in _lambda_vectors(q):
        Mx = combo(lam)
        ranks = Mx.ranks()
        if not np.all(ranks == 2):
            return ResolventResult(None, False, False, 0, c, q,
                                   f"NOT-WEBER: structure tensor rank {ranks.tolist()}")
        vecs, _ = Mx.nullspace()
        kernels.append(vecs)
    from .diffgeo import _combine

    fields = _combine(D, kernels[0], r) + _combine(D, kernels[1], r)
    R = Distribution(fields, chart).pruned()
    if len(R.frame) != c + q:
        return ResolventResult(R, False, False, len(R.frame), c, q,
                               "NOT-WEBER: singular sub-bundle has wrong rank")
    if not R.contains(_combine(D, kernels[2], r)):
        return ResolventResult(R, False, False, len(R.frame), c, q,
                               "NOT-WEBER: singular locus is not linear")
    # isotropy: every structure tensor vanishes on R
    for w in theta.forms:
        for i, A in enumerate(R.frame):
            for B in R.frame[i + 1:]:
                if not chart.is_zero(w(lie_bracket(A, B))):
                    return ResolventResult(R, False, False, len(R.frame), c, q,
                                           "NOT-WEBER: resolvent not isotropic")
    # generic polar rank equals q
    rng = np.random.default_rng(104729)
    a = rng.uniform(0.5, 1.5, size=r)
    P = np.einsum("i,kijs->sjk", a, _tensor_values(S, chart, r, q))
    if not np.all(sampled_ranks(P) == q):
        return ResolventResult(R, False, False, len(R.frame), c, q,
                               "NOT-WEBER: generic polar rank differs from q")
    integ = is_integrable(R)
    return ResolventResult(R, True, integ, len(R.frame), c, q, "")


def _tensor_values(S, chart, r, q):
    s = chart.points.shape[0]
    flat = chart.values([S[k][i][j] for k in range(q) for i in range(r) for j in range(r)])
    return flat.reshape(q, r, r, s)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass
class GoursatReport:
    """Verdicts of the (relative) Goursat test.

    Attributes
    ----------
    rdt : RefinedDerivedType or None
    signature : Signature or None
        Present when the type check passes.
    matches_partial_prolongation : bool
    intersections_integrable : dict
        Level ``j`` to the integrability verdict for ``ch V^(j)_{j-1}``.
    resolvent_integrable : bool or None
        ``None`` when the last velocity is one.
    is_goursat : bool
    relative : bool
    esft : tuple
        ``(cond1, cond2)``; entries are ``None`` when out of scope.
    status : str
        ``OK`` or ``NOT-TOTALLY-REGULAR``.
    diagnostics : list of str
    """

    rdt: Optional[RefinedDerivedType] = None
    signature: Optional[Signature] = None
    matches_partial_prolongation: bool = False
    intersections_integrable: dict = field(default_factory=dict)
    resolvent_integrable: Optional[bool] = None
    weber: Optional[bool] = None
    is_goursat: bool = False
    relative: bool = False
    esft: tuple = (None, None)
    esft_scope: str = ""
    status: str = "OK"
    diagnostics: list = field(default_factory=list)

    @property
    def is_relative_goursat(self) -> bool:
        return self.relative and self.is_goursat


def _classify(D: Distribution, relative: bool) -> GoursatReport:
    rep = GoursatReport(relative=relative)
    try:
        an = analyze(D)
    except NotTotallyRegular as exc:
        rep.status = "NOT-TOTALLY-REGULAR"
        rep.diagnostics.append(str(exc))
        return rep
    rep.rdt = an.rdt
    sig = matches_partial_prolongation(an.rdt, relative=relative, dim=D.chart.dim)
    if sig is None:
        rep.diagnostics.append("type numbers are not those of a partial prolongation")
        rep.signature = None
        return rep
    rep.signature = sig
    rep.matches_partial_prolongation = True
    ok = True
    for j in sorted(an.ch_int):
        integ = is_integrable(an.ch_int[j])
        rep.intersections_integrable[j] = integ
        if not integ:
            ok = False
            rep.diagnostics.append(f"ch V^({j})_{j - 1} not integrable")
    if sig.velocity[-1] > 1:
        res = resolvent_bundle(an.flag[an.k - 1])
        rep.weber = res.weber
        rep.resolvent_integrable = res.integrable
        if not res.weber:
            ok = False
            rep.diagnostics.append(res.reason)
        elif not res.integrable:
            ok = False
            rep.diagnostics.append("resolvent bundle not integrable")
    rep.is_goursat = ok
    return rep


def classify_goursat(D: Distribution) -> GoursatReport:
    """Goursat bundle test (type check, intersections, resolvent)."""
    return _classify(D, relative=False)


def classify_relative_goursat(D: Distribution) -> GoursatReport:
    """Relative Goursat test with Cauchy-shifted type numbers."""
    return _classify(D, relative=True)


@dataclass(frozen=True)
class EsftResult:
    """The two static-feedback conditions, or an out-of-scope marker."""

    controls_in_cauchy: Optional[bool]
    dt_annihilates: Optional[bool]
    scope: str = ""

    def pair(self):
        return (self.controls_in_cauchy, self.dt_annihilates)


def esft_conditions(D: Distribution, symmetries=None) -> EsftResult:
    """Extended static feedback conditions on ``D`` (or on ``D + symmetries``).

    Checks that every control field lies in ``V^(0) ∩ ch V^(1)`` and that
    ``dt`` annihilates ``ch V^(k-1)``.  Derived length one is reported as
    out of scope.
    """
    chart = D.chart
    Vhat = D if not symmetries else Distribution(D.frame + tuple(symmetries), chart)
    an = analyze(Vhat)
    k = an.k
    if k <= 1:
        return EsftResult(None, None, OUT_OF_SCOPE)
    controls = [chart.coordinate_field(u) for u in chart.controls]
    cond1 = an.ch_int[1].contains(controls)
    if chart.time is None:
        raise ValueError("the chart declares no time variable")
    ti = chart.index[chart.time]
    cond2 = all(chart.is_zero(Y.comps[ti]) for Y in an.ch[k - 1].frame)
    return EsftResult(bool(cond1), bool(cond2))


# ---------------------------------------------------------------------------
# contact coordinates
# ---------------------------------------------------------------------------

class ContactError(ValueError):
    """A supplied fundamental function or section failed verification."""


@dataclass
class ContactResult:
    """Chains of contact coordinates ``z_s`` per fundamental function."""

    x: Expr
    chains: dict
    verified: bool
    max_residual: float
    jacobian_rank: int
    pi_chain: list = field(default_factory=list)

    def coordinates(self) -> list:
        out = [self.x]
        for j in sorted(self.chains):
            for chain in self.chains[j]:
                out.extend(chain)
        return out


def pi_chain(D: Distribution, Z: VectorField, k: int, an: FlagAnalysis | None = None) -> list:
    """``Pi^1 = ch V^(1)_0`` and ``Pi^(l+1) = Pi^l + [Z, Pi^l]`` up to ``Pi^k``."""
    an = an or analyze(D)
    if 1 in an.ch_int:
        P = an.ch_int[1]
    else:
        P = an.ch[1] if len(an.ch) > 1 else an.ch[0]
    out = [P.pruned()]
    for _ in range(1, k):
        cur = out[-1]
        nxt = Distribution(cur.frame + tuple(lie_bracket(Z, Y) for Y in cur.frame), D.chart)
        out.append(nxt.pruned(start=len(cur.frame)))
    return out


def contact_coordinates(D: Distribution, Z: VectorField, fundamentals: dict,
                        x="t", check_goursat: bool = True) -> ContactResult:
    """Verify fundamental functions and build contact coordinate chains.

    Parameters
    ----------
    D : Distribution
        A Goursat bundle.
    Z : VectorField
        Section of ``D`` with ``Z(x) = 1``.
    fundamentals : dict
        Order ``j`` to a list of candidate fundamental functions.
    x : str or Expr
        Independent variable of the contact chart.

    Raises
    ------
    ContactError
        Naming the failing bundle when a candidate is rejected.
    """
    chart = D.chart
    x = chart.check_expr(x) if not isinstance(x, Expr) else x
    an = analyze(D)
    k = an.k
    rep = classify_goursat(D) if check_goursat else None
    if rep is not None and not rep.is_goursat:
        raise ContactError("distribution is not a Goursat bundle")
    sig = deceleration(an.rdt)
    if not D.contains([Z]):
        raise ContactError("Z is not a section of the distribution")
    if not chart.is_zero(add(apply(Z, x), -1)):
        raise ContactError("Z(x) != 1")
    pis = pi_chain(D, Z, k, an) if k >= 2 or sig.velocity[-1] == 1 else []
    resolvent = None
    chains = {}
    for j in sorted(fundamentals):
        funcs = [chart.check_expr(f) for f in fundamentals[j]]
        if not 1 <= j <= k:
            raise ContactError(f"order {j} outside 1..{k}")
        if len(funcs) != sig.decel[j - 1]:
            raise ContactError(f"order {j} needs {sig.decel[j - 1]} fundamental functions, "
                               f"got {len(funcs)}")
        for f in funcs:
            if j == k:
                if sig.velocity[-1] == 1:
                    target, label = pis[-1], f"Pi^{k}"
                else:
                    if resolvent is None:
                        resolvent = resolvent_bundle(an.flag[k - 1])
                    if resolvent.bundle is None:
                        raise ContactError("resolvent bundle unavailable")
                    target, label = resolvent.bundle, f"R(V^({k - 1}))"
                if not is_first_integral(f, target):
                    raise ContactError(f"{f} is not a first integral of {label}")
            else:
                if not is_first_integral(f, an.ch_int[j]):
                    raise ContactError(f"{f} is not a first integral of ch V^({j})_{j - 1}")
                if is_first_integral(f, an.ch[j]):
                    raise ContactError(f"{f} is trivial modulo the annihilator of ch V^({j})")
        chains[j] = []
        for f in funcs:
            chain = [f]
            for _ in range(j):
                chain.append(apply(Z, chain[-1]))
            chains[j].append(chain)
    # pulled-back contact forms dz_s - z_{s+1} dx must annihilate D
    worst = 0.0
    ok = True
    for j, cl in chains.items():
        for chain in cl:
            for s_ in range(j):
                for Y in D.frame:
                    res = add(apply(Y, chain[s_]), mul(-1, chain[s_ + 1], apply(Y, x)))
                    vals = chart.values([res])[0]
                    worst = max(worst, float(np.max(np.abs(vals))))
                    if not chart.is_zero(res):
                        ok = False
    coords = [x] + [z for j in sorted(chains) for c in chains[j] for z in c]
    from .symexpr import diff

    grads = [[diff(z, v) for v in chart.variables] for z in coords]
    s = chart.points.shape[0]
    gv = chart.values([g for row in grads for g in row]).reshape(len(coords), chart.dim, s)
    jr = int(sampled_ranks(gv.transpose(2, 0, 1)).min())
    if jr != chart.dim:
        ok = False
    return ContactResult(x, chains, ok, worst, jr, pis)


# ---------------------------------------------------------------------------
# normal forms
# ---------------------------------------------------------------------------

def contact_system(decel, domain=None):
    """The partial prolongation ``C<decel>`` as a distribution.

    Coordinates are ``x`` and ``z{j}_{l}_{s}`` for chain ``l`` of order
    ``j`` and derivative index ``s``; the top-order variables are controls.
    """
    from .diffgeo import Chart

    names = ["x"]
    states, controls = [], []
    chains = []
    for j, rho in enumerate(decel, start=1):
        for l in range(1, rho + 1):
            chain = [f"z{j}_{l}_{s}" for s in range(j + 1)]
            names.extend(chain)
            states.extend(chain[:-1])
            controls.append(chain[-1])
            chains.append(chain)
    chart = Chart(names, time="x", states=states, controls=controls, domain=domain)
    T = {"x": 1}
    for chain in chains:
        for s_ in range(len(chain) - 1):
            T[chain[s_]] = var(chain[s_ + 1])
    fields = [chart.field(T, "T")] + [chart.coordinate_field(u) for u in controls]
    return Distribution(fields, chart, f"C<{','.join(str(r) for r in decel)}>"), chains
