"""TOML model files.

A model file declares a chart and either a drift (control system form),
an explicit frame, or a Pfaffian system.  Symmetries and reduction data are
optional.  Every expression string is checked against the declared
variables; errors name the offending key and expression.

Example
-------
.. code-block:: toml

    name = "unicycle"

    [chart]
    variables = ["t", "x", "y", "theta", "u1", "u2"]
    time = "t"
    states = ["x", "y", "theta"]
    controls = ["u1", "u2"]
    singular = ["sin(theta)"]

    [chart.box]
    theta = [0.3, 2.8]

    [drift]
    x = "u1*cos(theta)"
    y = "u1*sin(theta)"
    theta = "u2"

    [symmetries.X1]
    x = "1"

    [reduction]
    gamma = ["X1"]
    invariants = { w1 = "y", w2 = "theta" }

    [expected]
    rdt = [[3, 0], [5, 2, 3], [6, 6]]
"""
from __future__ import annotations

import sys

from ..diffgeo import ChartMismatchError, Chart, Distribution, PfaffianSystem, co_annihilator
from ..symexpr import ParseError, SampleDomain, parse_expr
from .base import Model, control_system

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on older interpreters only
    import tomli as tomllib


class ModelFileError(ValueError):
    """Invalid model file; the message names the location."""


_TOP = {"name", "chart", "drift", "fields", "forms", "symmetries", "reduction",
        "expected", "params", "fundamentals"}
_CHART = {"variables", "time", "states", "controls", "singular", "box", "samples", "seed"}


def _expr(chart: Chart, where: str, text):
    if not isinstance(text, (str, int, float)):
        raise ModelFileError(f"{where}: expected an expression string, got {text!r}")
    try:
        e = parse_expr(str(text))
        return chart.check_expr(e)
    except ParseError as exc:
        raise ModelFileError(f"{where}: cannot parse {text!r}: {exc}") from None
    except ChartMismatchError as exc:
        raise ModelFileError(f"{where}: {exc} in {text!r}") from None


def _table(doc, key, where):
    val = doc.get(key, {})
    if not isinstance(val, dict):
        raise ModelFileError(f"{where}: [{key}] must be a table")
    return val


def _names(val, where):
    if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
        raise ModelFileError(f"{where}: expected a list of names")
    return val


def _components(chart, comps, where):
    if not isinstance(comps, dict):
        raise ModelFileError(f"{where}: expected a table of components")
    out = {}
    for v, e in comps.items():
        if v not in chart.index:
            raise ModelFileError(f"{where}.{v}: undeclared variable {v!r}")
        out[v] = _expr(chart, f"{where}.{v}", e)
    return out


def parse_model(doc: dict, source: str = "<model>", samples: int | None = None,
                seed: int | None = None) -> Model:
    """Build a :class:`Model` from a parsed TOML document."""
    unknown = set(doc) - _TOP
    if unknown:
        raise ModelFileError(f"{source}: unknown top-level key(s) {sorted(unknown)}")
    name = str(doc.get("name", source))
    ch = _table(doc, "chart", source)
    if not ch:
        raise ModelFileError(f"{source}: missing [chart] table")
    bad = set(ch) - _CHART
    if bad:
        raise ModelFileError(f"{source}: unknown [chart] key(s) {sorted(bad)}")
    variables = _names(ch.get("variables"), f"{source}: chart.variables")
    time = ch.get("time", "t" if "t" in variables else None)
    states = _names(ch.get("states", []), f"{source}: chart.states")
    controls = _names(ch.get("controls", []), f"{source}: chart.controls")
    box = {}
    for v, iv in _table(ch, "box", f"{source}: chart").items():
        if v not in variables:
            raise ModelFileError(f"{source}: chart.box.{v}: undeclared variable {v!r}")
        if (not isinstance(iv, list) or len(iv) != 2
                or not all(isinstance(a, (int, float)) for a in iv) or not iv[0] < iv[1]):
            raise ModelFileError(f"{source}: chart.box.{v}: expected [lo, hi] with lo < hi")
        box[v] = (float(iv[0]), float(iv[1]))
    n = int(samples if samples is not None else ch.get("samples", 7))
    s = int(seed if seed is not None else ch.get("seed", 42))
    try:
        chart = Chart(variables, time, states, controls, SampleDomain(box, n, s))
    except ValueError as exc:
        raise ModelFileError(f"{source}: chart: {exc}") from None
    singular = [_expr(chart, f"{source}: chart.singular[{i}]", e)
                for i, e in enumerate(ch.get("singular", []))]
    chart = Chart(variables, time, states, controls, chart.domain, singular)

    kinds = [k for k in ("drift", "fields", "forms") if k in doc]
    if len(kinds) != 1:
        raise ModelFileError(f"{source}: give exactly one of [drift], [fields] or [forms]")
    drift = pfaffian = None
    if "drift" in doc:
        comps = _table(doc, "drift", source)
        for v in comps:
            if v not in chart.states:
                raise ModelFileError(f"{source}: drift.{v}: {v!r} is not a declared state")
        rhs = {v: _expr(chart, f"{source}: drift.{v}", e) for v, e in comps.items()}
        D, pfaffian, drift = control_system(chart, rhs, name)
    elif "fields" in doc:
        fields = [chart.field(_components(chart, c, f"{source}: fields.{k}"), k)
                  for k, c in _table(doc, "fields", source).items()]
        if not fields:
            raise ModelFileError(f"{source}: [fields] is empty")
        D = Distribution(fields, chart, name)
    else:
        forms = [chart.form(_components(chart, c, f"{source}: forms.{k}"), k)
                 for k, c in _table(doc, "forms", source).items()]
        if not forms:
            raise ModelFileError(f"{source}: [forms] is empty")
        pfaffian = PfaffianSystem(forms, chart, name)
        D = co_annihilator(pfaffian)
        D.name = name
    syms = {k: chart.field(_components(chart, c, f"{source}: symmetries.{k}"), k)
            for k, c in _table(doc, "symmetries", source).items()}
    m = Model(name, chart, D, pfaffian, drift, syms, params=dict(_table(doc, "params", source)))
    red = _table(doc, "reduction", source)
    if red:
        gamma = tuple(_names(red.get("gamma", []), f"{source}: reduction.gamma"))
        missing = [g for g in gamma if g not in syms]
        if missing:
            raise ModelFileError(f"{source}: reduction.gamma names unknown symmetries {missing}")
        m.gamma = gamma
        inv = red.get("invariants", {})
        for w, e in inv.items():
            _expr(chart, f"{source}: reduction.invariants.{w}", e)
        m.invariants = dict(inv)
        if "section" in red:
            m.section = dict(red["section"])
        if "action" in red:
            act = red["action"]
            if not isinstance(act, dict) or "params" not in act or "components" not in act:
                raise ModelFileError(f"{source}: reduction.action needs params and components")
            m.action = {"params": _names(act["params"], f"{source}: reduction.action.params"),
                        "components": dict(act["components"])}
        m.quotient_singular = tuple(red.get("singular", ()))
    fund = _table(doc, "fundamentals", source)
    m.fundamentals = {int(k): list(v) for k, v in fund.items()}
    if "expected" in doc:
        exp = _table(doc, "expected", source)
        m.expected = {"": dict(exp, origin=exp.get("origin", "user"))}
    return m


def load_model(path, samples: int | None = None, seed: int | None = None) -> Model:
    """Read a TOML model file.

    Raises
    ------
    ModelFileError
        On syntax errors, undeclared variables or inconsistent blocks.
    """
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ModelFileError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ModelFileError(f"{path}: {exc}") from None
    return parse_model(doc, str(path), samples, seed)
