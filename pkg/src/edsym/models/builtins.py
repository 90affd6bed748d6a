"""Built-in model zoo.

Every model carries the symmetry, action and reduction data needed by the
quotient and reconstruction pipeline, together with expected analysis
results for regression.  Expected-result records carry an ``origin``
field: ``reference`` for independently known values and ``computed`` for values
obtained by this package and cross-checked independently.
"""
from __future__ import annotations

import re
from fractions import Fraction

from ..diffgeo import Chart, PfaffianSystem, co_annihilator
from ..goursat import contact_system, expected_type
from ..symexpr import SampleDomain, const, var
from .base import Model, control_system

OUT = "OUT-OF-THEOREM-SCOPE"


def scenario(prolonged=(), gamma=None) -> str:
    """Key of an expected-results record, e.g. ``"pr u2:4"`` or ``"+X4,X8"``."""
    parts = []
    if prolonged:
        parts.append("pr " + ",".join(prolonged))
    if gamma:
        parts.append("+" + ",".join(gamma))
    return " ".join(parts)


def _domain(box=None, samples=7, seed=42):
    return SampleDomain(box or {}, samples, seed)


def _ratio(a, b):
    """Exact ratio for integral arguments, float otherwise."""
    a, b = float(a), float(b)
    if a.is_integer() and b.is_integer():
        return const(Fraction(int(a), int(b)))
    return const(a / b)


def _num(x):
    """Exact constant for integral or simple rational parameters."""
    fr = Fraction(x).limit_denominator(10**6)
    if abs(float(fr) - float(x)) < 1e-15:
        return const(fr)
    return const(float(x))


# ---------------------------------------------------------------------------
# 3-DOF under-actuated ship
# ---------------------------------------------------------------------------

SHIP_VARS = ["t", "x", "y", "theta", "z", "u1", "u2"]

SHIP_SYMMETRIES = {
    "X1": {"x": "-y", "y": "x", "theta": "1"},
    "X2": {"x": "x", "y": "y", "z": "z", "u1": "u1"},
    "X3": {"y": "exp(-t)", "z": "-exp(-t)*cos(theta)", "u1": "-exp(-t)*sin(theta)"},
    "X4": {"x": "-exp(-t)", "z": "-exp(-t)*sin(theta)", "u1": "exp(-t)*cos(theta)"},
    "X5": {"x": "-x", "y": "y", "theta": "sin(2*theta)", "z": "z*cos(2*theta)",
           "u1": "-(u1*cos(2*theta) - 2*z*sin(2*theta))", "u2": "2*u2*cos(2*theta)"},
    "X6": {"x": "y", "y": "x", "theta": "cos(2*theta)", "z": "-z*sin(2*theta)",
           "u1": "u1*sin(2*theta) + 2*z*cos(2*theta)", "u2": "-2*u2*sin(2*theta)"},
    "X7": {"y": "1"},
    "X8": {"x": "1"},
}

SHIP_EXPECTED = {
    "": {"rdt": [[3, 0], [5, 0, 0], [7, 7]], "decel": None, "goursat": False,
         "origin": "reference"},
    "+X4,X8": {"rdt": [[5, 2], [7, 7]], "decel": [2], "relative": True,
               "resolvent_integrable": True, "esft": OUT, "origin": "reference",
               "quotient_forms": ["dw2 - w3*dt", "dw1 - w4*sin(w2)*dt"]},
    "pr u2:4": {"rdt": [[3, 0], [5, 2, 2], [7, 4, 4], [9, 6, 7], [10, 8, 8], [11, 11]],
                "decel": [0, 0, 1, 0, 1], "goursat": True, "esft": [True, True],
                "origin": "reference"},
    "pr u2:3": {"rdt": [[3, 0], [5, 2, 2], [7, 4, 4], [9, 6, 7], [10, 10]],
                "decel": [0, 0, 1, 1], "goursat": False, "type_matches": True,
                "failing_level": 3, "origin": "reference"},
}

SHIP_FLAT_OUTPUT_A = ("(2*y*u2^2 - x*(v1 + u2))*sin(theta) + (2*x*u2^2 + y*(v1 + u2))*cos(theta)"
                      " + 2*z*u2")


def ship3dof(beta=1, gamma=1, samples=7, seed=42) -> Model:
    """Surge/sway/yaw ship with controls ``u1`` (surge) and ``u2`` (yaw rate)."""
    beta, gamma = float(beta), float(gamma)
    if beta <= 0 or gamma <= 0:
        raise ValueError("beta and gamma must be positive")
    chart = Chart(SHIP_VARS, "t", ["x", "y", "theta", "z"], ["u1", "u2"],
                  _domain(samples=samples, seed=seed), singular=["sin(theta)"])
    b, g = _num(beta), _num(gamma)
    drift = {"x": "u1*cos(theta) - z*sin(theta)", "y": "u1*sin(theta) + z*cos(theta)",
             "theta": "u2", "z": -(g * var("u1") * var("u2")) - b * var("z")}
    D, P, Z = control_system(chart, drift, "E")
    unit = beta == 1.0 and gamma == 1.0
    names = list(SHIP_SYMMETRIES) if unit else ["X1", "X2", "X7", "X8"]
    syms = {k: chart.field(SHIP_SYMMETRIES[k], k) for k in names}
    m = Model("ship3dof", chart, D, P, Z, syms, params={"beta": beta, "gamma": gamma})
    if unit:
        m.gamma = ("X4", "X8")
        m.action = {"params": ["e1", "e2"],
                    "components": {"x": "x - e1*exp(-t) + e2",
                                   "z": "z - e1*exp(-t)*sin(theta)",
                                   "u1": "u1 + e1*exp(-t)*cos(theta)"}}
        m.invariants = {"w1": "y", "w2": "theta", "w3": "u2", "w4": "u1 + z*cot(theta)"}
        m.section = {"t": "t", "x": "0", "y": "w1", "theta": "w2", "z": "0",
                     "u1": "w4", "u2": "w3"}
        m.quotient_singular = ("sin(w2)",)
        m.reductions = {("X4",): {
            "invariants": {"w1": "y", "w2": "theta", "w3": "u2", "w4": "u1 + z*cot(theta)",
                           "w5": "x - z/sin(theta)"},
            "singular": ("sin(w2)",)}}
        m.expected = dict(SHIP_EXPECTED)
    else:
        m.expected = {"": SHIP_EXPECTED[""]}
    return m


def ship3dof_pfaffian(samples=7, seed=42) -> Model:
    """The unit-parameter ship given by its Pfaffian forms."""
    base = ship3dof(samples=samples, seed=seed)
    chart = base.chart
    forms = [chart.form({"x": "1", "t": "-(u1*cos(theta) - z*sin(theta))"}, "omega1"),
             chart.form({"y": "1", "t": "-(u1*sin(theta) + z*cos(theta))"}, "omega2"),
             chart.form({"theta": "1", "t": "-u2"}, "omega3"),
             chart.form({"z": "1", "t": "u1*u2 + z"}, "omega4")]
    P = PfaffianSystem(forms, chart, "omega")
    D = co_annihilator(P)
    D.name = "ker omega"
    base.name = "ship3dof-pfaffian"
    base.pfaffian = P
    base.distribution = D
    return base


# ---------------------------------------------------------------------------
# six-form ship with damping
# ---------------------------------------------------------------------------

SHIP6_VARS = ["t", "x", "y", "theta", "z", "u", "v", "u1", "u2"]


def ship6form(m11=1, m22=1, m33=1, d1=1, d2=1, d3=1, samples=7, seed=42) -> Model:
    """Ship with surge/yaw dynamics and diagonal damping (six forms)."""
    p = {"m11": m11, "m22": m22, "m33": m33, "d1": d1, "d2": d2, "d3": d3}
    for k, val in p.items():
        if float(val) <= 0:
            raise ValueError(f"{k} must be positive")
    g2 = _ratio(float(m11) - float(m22), m33)
    g1 = _ratio(m22, m11)
    b1, b2, b3 = _ratio(d1, m11), _ratio(d2, m22), _ratio(d3, m33)
    chart = Chart(SHIP6_VARS, "t", ["x", "y", "theta", "z", "u", "v"], ["u1", "u2"],
                  _domain(samples=samples, seed=seed), singular=["sin(theta)"])
    u, v, z = var("u"), var("v"), var("z")
    drift = {"x": "u*cos(theta) - z*sin(theta)", "y": "u*sin(theta) + z*cos(theta)",
             "theta": "v", "z": -(g1 * u * v + b1 * z),
             "u": z * v / g1 - b2 * u + var("u1"),
             "v": g2 * u * z - b3 * v + var("u2")}
    D, P, Z = control_system(chart, drift, "V")
    syms = {"X1": chart.field({"x": "-y", "y": "x", "theta": "1"}, "X1"),
            "X2": chart.field({"x": "x", "y": "y", "u": "u", "z": "z", "u1": "u1",
                               "u2": -2 * g2 * u * z}, "X2"),
            "X3": chart.field({"x": "1"}, "X3"),
            "X4": chart.field({"y": "1"}, "X4")}
    unit = all(float(val) == 1.0 for val in p.values())
    m = Model("ship6form", chart, D, P, Z, syms, params={k: float(x) for k, x in p.items()})
    if unit:
        syms["G1"] = chart.field({"y": "-exp(-t)", "u": "exp(-t)*sin(theta)",
                                  "z": "exp(-t)*cos(theta)"}, "G1")
        syms["G2"] = chart.field({"y": "1"}, "G2")
        m.gamma = ("G1", "G2")
        m.expected = {"+G1,G2": {"rdt": [[5, 2], [7, 4, 4], [9, 9]], "decel": [0, 2],
                                 "relative": True, "resolvent_integrable": True,
                                 "esft": [True, True], "origin": "reference"}}
    else:
        m.gamma = ("X2", "X3")
        if p == {"m11": 2, "m22": 1, "m33": 1, "d1": 1, "d2": 1, "d3": 1}:
            m.expected = {"+X2,X3": {"decel": [0, 2], "relative": True,
                                     "esft": [True, True], "origin": "reference"}}
    return m


# ---------------------------------------------------------------------------
# Hunt-Su-Meyer example
# ---------------------------------------------------------------------------

def hsm(samples=7, seed=42) -> Model:
    """Five-state, two-input system with signature <0,1,1>."""
    chart = Chart(["t", "x1", "x2", "x3", "x4", "x5", "u1", "u2"], "t",
                  ["x1", "x2", "x3", "x4", "x5"], ["u1", "u2"],
                  _domain(samples=samples, seed=seed))
    drift = {"x1": "sin(x2)", "x2": "sin(x3)", "x3": "u1 + x4^3",
             "x4": "x5 + x4^3 - x1^10", "x5": "u2"}
    D, P, Z = control_system(chart, drift, "V")
    m = Model("hsm", chart, D, P, Z)
    m.fundamentals = {2: ["x4"], 3: ["x1"]}
    m.expected = {"": {"rdt": [[3, 0], [5, 2, 2], [7, 4, 5], [8, 8]], "decel": [0, 1, 1],
                       "goursat": True, "esft": [True, True], "origin": "reference"}}
    return m


# ---------------------------------------------------------------------------
# driftless 2-plane field in five states (non-flat)
# ---------------------------------------------------------------------------

def martin_rouchon(samples=7, seed=42) -> Model:
    """Control system built on the most symmetric generic 2-plane field on R^5."""
    chart = Chart(["t", "x1", "x2", "x3", "x4", "x5", "u1", "u2"], "t",
                  ["x1", "x2", "x3", "x4", "x5"], ["u1", "u2"],
                  _domain(samples=samples, seed=seed), singular=["x1"])
    drift = {"x1": "u1", "x2": "u1*x3", "x3": "u1*x5", "x4": "u1*x5^2", "x5": "u2"}
    D, P, Z = control_system(chart, drift, "V")
    syms = {"X1": chart.field({"x2": "x1^2/2", "x3": "x1", "x4": "2*x3", "x5": "1"}, "X1"),
            "X2": chart.field({"x2": "x1", "x3": "1"}, "X2"),
            "X3": chart.field({"x4": "1"}, "X3"),
            "X4": chart.field({"x1": "1"}, "X4"),
            "X5": chart.field({"x2": "1"}, "X5")}
    m = Model("martin-rouchon", chart, D, P, Z, syms, ("X1", "X3"))
    m.invariants = {"w1": "x1", "w2": "x1*x3 - 2*x2", "w3": "x1^2*x5 - 2*x2",
                    "u1": "u1", "u2": "u2"}
    m.quotient_singular = ("w1",)
    m.expected = {
        "": {"rdt": [[3, 0], [5, 2, 3], [6, 3, 3], [8, 8]], "decel": None,
             "goursat": False, "origin": "reference"},
        "+X1,X3": {"rdt": [[5, 2], [7, 4, 5], [8, 8]], "decel": [1, 1], "relative": True,
                   "esft": [None, False], "origin": "reference",
                   "quotient_frame": {"w1": "u1", "w2": "-u1*(w2 - w3)/w1",
                                      "w3": "-2*u1*(w2 - w3)/w1 + u2*w1^2"}},
        "pr u1:1 +X1,X3": {"rdt": [[5, 2], [7, 4, 4], [9, 9]], "decel": [0, 2],
                           "relative": True, "resolvent_integrable": True,
                           "origin": "reference"},
    }
    return m


# ---------------------------------------------------------------------------
# Brunovsky normal forms
# ---------------------------------------------------------------------------

def contact(sigma, samples=7, seed=42) -> Model:
    """Partial prolongation ``C<sigma>`` in chain coordinates."""
    sigma = tuple(int(s) for s in sigma)
    if not sigma or sigma[-1] < 1 or any(s < 0 for s in sigma):
        raise ValueError("signature must be nonnegative with a positive last entry")
    D, chains = contact_system(sigma, _domain(samples=samples, seed=seed))
    chart = D.chart
    fund = {}
    for j, rho in enumerate(sigma, start=1):
        fund[j] = [f"z{j}_{l}_0" for l in range(1, rho + 1)] if rho else []
    fund = {j: f for j, f in fund.items() if f}
    m = Model(f"contact({','.join(map(str, sigma))})", chart, D, None, D.frame[0])
    m.fundamentals = fund
    rdt = expected_type(sigma)
    m.expected = {"": {"rdt": [list(L) for L in rdt.levels()], "decel": list(sigma),
                       "goursat": True, "origin": "computed"}}
    m.params = {"sigma": list(sigma)}
    return m


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

REGISTRY = {
    "ship3dof": ship3dof,
    "ship3dof-pfaffian": ship3dof_pfaffian,
    "ship6form": ship6form,
    "hsm": hsm,
    "martin-rouchon": martin_rouchon,
    "contact": contact,
}

DESCRIPTIONS = {
    "ship3dof": "3-DOF under-actuated ship (params beta, gamma)",
    "ship3dof-pfaffian": "3-DOF ship given by its four Pfaffian forms",
    "ship6form": "ship with surge/yaw damping (params m11 m22 m33 d1 d2 d3)",
    "hsm": "five-state two-input example with signature <0,1,1>",
    "martin-rouchon": "non-flat system on the symmetric generic 2-plane field",
    "contact": "Brunovsky normal form contact(s1,...,sk)",
}

_CALL = re.compile(r"^\s*([A-Za-z0-9_-]+)\s*(?:\(([^)]*)\))?\s*$")


def builtin(name: str, params: dict | None = None, **kw) -> Model:
    """Construct a built-in model by name.

    ``name`` may carry arguments, e.g. ``"contact(0,1,1)"`` or
    ``"ship6form(m11=2)"``.

    Raises
    ------
    KeyError
        Unknown model name.
    ValueError
        Invalid parameters.
    """
    mt = _CALL.match(name)
    if not mt:
        raise KeyError(f"cannot parse model name {name!r}")
    base, args = mt.group(1), mt.group(2)
    if base not in REGISTRY:
        raise KeyError(f"unknown model {base!r}; available: {', '.join(sorted(REGISTRY))}")
    params = dict(params or {})
    params.update(kw)
    positional = []
    if args:
        for a in args.split(","):
            a = a.strip()
            if not a:
                continue
            if "=" in a:
                k, v = a.split("=", 1)
                params[k.strip()] = _parse_number(v)
            else:
                positional.append(_parse_number(a))
    if base == "contact":
        sigma = positional or params.pop("sigma", None)
        if not sigma:
            raise ValueError("contact needs a signature, e.g. contact(0,1,1)")
        return contact(sigma, **params)
    if positional:
        raise ValueError(f"{base} takes keyword parameters only")
    try:
        return REGISTRY[base](**params)
    except TypeError as exc:
        raise ValueError(f"invalid parameters for {base}: {exc}") from None


def _parse_number(s):
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        return float(s)


def list_models() -> list:
    return sorted(REGISTRY)
