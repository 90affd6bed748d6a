import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edsym.diffgeo import (Chart, ChartMismatchError, Distribution, NotTotallyRegular,
                           annihilator, cauchy_characteristics, change_coordinates,
                           co_annihilator, derived_flag, intersect, is_integrable, lie_bracket,
                           rank, same_span)
from edsym.goursat import analyze, classify_goursat
from edsym.models import builtin, prolong
from edsym.symexpr import SampleDomain

CHART = Chart(["a", "b", "c"], time=None)
MONOMIALS = ["1", "a", "b", "c", "a*b", "b*c", "a^2", "sin(c)", "exp(a)"]


@st.composite
def fields(draw):
    comps = {}
    for v in CHART.variables:
        terms = draw(st.lists(st.tuples(st.integers(-3, 3), st.sampled_from(MONOMIALS)),
                              min_size=1, max_size=3))
        comps[v] = " + ".join(f"({c})*{m}" for c, m in terms)
    return CHART.field(comps)


def _zero(X):
    return all(CHART.is_zero(c) for c in X.comps)


@settings(max_examples=20, deadline=None)
@given(fields(), fields())
def test_bracket_antisymmetry(X, Y):
    S = lie_bracket(X, Y)
    T = lie_bracket(Y, X)
    assert all(CHART.is_zero(a + b) for a, b in zip(S.comps, T.comps))


@settings(max_examples=20, deadline=None)
@given(fields(), fields(), fields())
def test_jacobi_identity(X, Y, Z):
    terms = [lie_bracket(X, lie_bracket(Y, Z)), lie_bracket(Y, lie_bracket(Z, X)),
             lie_bracket(Z, lie_bracket(X, Y))]
    total = [a + b + c for a, b, c in zip(*(t.comps for t in terms))]
    assert all(CHART.is_zero(e) for e in total)


def test_bracket_needs_common_chart():
    other = Chart(["a", "b"], time=None)
    with pytest.raises(ChartMismatchError):
        lie_bracket(CHART.coordinate_field("a"), other.coordinate_field("a"))


def _cases():
    ship = builtin("ship3dof")
    mr = builtin("martin-rouchon")
    return {
        "hsm": builtin("hsm").distribution,
        "martin-rouchon": mr.distribution,
        "mr+gamma": mr.augmented(),
        "ship": ship.distribution,
        "ship+gamma": ship.augmented(),
        "pr4 ship": prolong(ship, "u2", 4).distribution,
        "pr3 ship": prolong(ship, "u2", 3).distribution,
    }


CASES = _cases()


@pytest.mark.parametrize("name", sorted(CASES))
def test_flag_is_monotone_and_nested(name):
    flag = derived_flag(CASES[name])
    dims = [rank(L).rank for L in flag]
    assert dims == sorted(dims) and len(set(dims)) == len(dims)
    for lo, hi in zip(flag, flag[1:]):
        assert hi.contains(lo)
    assert not (len(flag) > 1 and same_span(flag[-1], flag[-2]))


@pytest.mark.parametrize("name", sorted(CASES))
def test_cauchy_bundles_are_integrable_subbundles(name):
    an = analyze(CASES[name])
    for L, C in zip(an.flag, an.ch):
        assert L.contains(C)
        assert is_integrable(C)
    for j, C in an.ch_int.items():
        assert an.flag[j - 1].contains(C)
        assert an.ch[j].contains(C)


@pytest.mark.parametrize("name", sorted(CASES))
def test_annihilator_duality(name):
    D = CASES[name].pruned()
    P = annihilator(D)
    assert P.annihilates(D)
    assert len(P) + len(D) == D.chart.dim
    assert same_span(co_annihilator(P), D)


def test_pfaffian_round_trip():
    m = builtin("ship3dof-pfaffian")
    P = m.pfaffian
    D = co_annihilator(P)
    back = annihilator(D)
    # same span: each original form is annihilated exactly where the new ones are
    assert len(back) == len(P)
    stacked = np.concatenate([back.values(), P.values()], axis=1)
    from edsym.linalg import sampled_ranks

    assert np.all(sampled_ranks(stacked) == len(P))


def test_intersection_is_symmetric_in_span():
    mr = builtin("martin-rouchon")
    an = analyze(mr.distribution)
    A, B = an.flag[0], an.ch[1]
    assert same_span(intersect(A, B), intersect(B, A))


def test_hsm_classification_is_diffeomorphism_invariant():
    m = builtin("hsm")
    rng = np.random.default_rng(2024)
    a, b, c = (int(v) for v in rng.integers(1, 4, size=3))
    new = ["y1", "y2", "y3", "y4", "y5"]
    # triangular polynomial change with unit diagonal, hence invertible
    psi = {"t": "t", "u1": "u1", "u2": "u2",
           "x1": "y1", "x2": f"y2 + {a}*y1^2", "x3": f"y3 - {b}*y1*y2",
           "x4": f"y4 + {c}*y2^3", "x5": "y5 + y1*y4"}
    variables = ["t"] + new + ["u1", "u2"]
    chart = Chart(variables, "t", new, ["u1", "u2"],
                  SampleDomain({}, 7, 42))
    D = Distribution([change_coordinates(X, psi, chart) for X in m.distribution.frame], chart)
    rep = classify_goursat(D)
    assert rep.rdt.levels() == [[3, 0], [5, 2, 2], [7, 4, 5], [8, 8]]
    assert str(rep.signature) == "<0,1,1>" and rep.is_goursat


def test_irregular_rank_is_detected():
    chart = Chart(["t", "x", "y", "z", "u"], "t", ["x", "y", "z"], ["u"],
                  SampleDomain({"x": (-1.0, 1.0)}, 9, 42))
    Z = chart.field({"t": "1", "x": "u", "y": "x + sqrt(x^2)", "z": "y"})
    D = Distribution([Z, chart.coordinate_field("u")], chart)
    with pytest.raises(NotTotallyRegular) as err:
        analyze(D)
    assert len(set(err.value.ranks)) > 1


def test_cauchy_of_contact_plane_is_trivial():
    chart = Chart(["x", "y", "p"], time=None)
    D = Distribution([chart.field({"x": "1", "y": "p"}), chart.coordinate_field("p")], chart)
    assert len(cauchy_characteristics(D).pruned()) == 0
