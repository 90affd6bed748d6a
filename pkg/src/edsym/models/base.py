"""Model container, control-system builders and prolongation."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from ..diffgeo import Chart, Distribution, OneForm, PfaffianSystem, VectorField
from ..symexpr import ONE, ZERO, Expr, as_expr, neg, parse_expr, var


@dataclass
class Model:
    """A control system with optional symmetry and reduction data.

    Attributes
    ----------
    name : str
    chart : Chart
    distribution : Distribution
        Frame ``{drift, d/du_1, ..., d/du_m}`` (or a user frame).
    pfaffian : PfaffianSystem or None
        Forms ``dx_i - f_i dt``; mutually annihilating with the frame.
    drift : VectorField or None
    symmetries : dict
        Name to generator.
    gamma : tuple of str
        Default generators used for quotients.
    action : dict or None
        ``{"params": [...], "components": {var: expr}}`` for ``gamma``.
    invariants : dict
        Quotient variable to invariant expression (for ``gamma``).
    section : dict or None
        Parent variable to expression in the quotient variables.
    quotient_singular : tuple
        Singular loci of the quotient chart.
    fundamentals : dict
        Order to candidate fundamental functions (contact coordinates).
    expected : dict
        Expected analysis results keyed by scenario.
    params : dict
    reductions : dict
        Further invariant sets keyed by a tuple of generator names; each
        value holds ``invariants`` and optionally ``section``, ``action``
        and ``singular``.
    """

    name: str
    chart: Chart
    distribution: Distribution
    pfaffian: Optional[PfaffianSystem] = None
    drift: Optional[VectorField] = None
    symmetries: dict = field(default_factory=dict)
    gamma: tuple = ()
    action: Optional[dict] = None
    invariants: dict = field(default_factory=dict)
    section: Optional[dict] = None
    quotient_singular: tuple = ()
    fundamentals: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    prolonged: tuple = ()
    renamed: list = field(default_factory=list)
    reductions: dict = field(default_factory=dict)

    def symmetry_fields(self, names=None) -> list:
        names = self.gamma if names is None else names
        missing = [n for n in names if n not in self.symmetries]
        if missing:
            raise KeyError(f"unknown symmetry name(s) {missing}; available: "
                           f"{sorted(self.symmetries)}")
        return [self.symmetries[n] for n in names]

    def reduction_data(self, names=None) -> Optional[dict]:
        """Invariants, section, action and singular loci for a generator set.

        Returns ``None`` when the model carries no invariants for ``names``.
        """
        names = tuple(self.gamma if names is None else names)
        if names == tuple(self.gamma) and self.invariants:
            return {"invariants": self.invariants, "section": self.section,
                    "action": self.action, "singular": self.quotient_singular}
        data = self.reductions.get(names)
        if data is None:
            return None
        return {"invariants": data["invariants"], "section": data.get("section"),
                "action": data.get("action"), "singular": tuple(data.get("singular", ()))}

    def augmented(self, names=None) -> Distribution:
        """``D + Gamma`` for the named generators."""
        return Distribution(self.distribution.frame + tuple(self.symmetry_fields(names)),
                            self.chart, f"{self.name}+Gamma")

    def with_domain(self, domain) -> "Model":
        """Same model on a chart with another sample domain."""
        return rebuild_model(self, self.chart.with_domain(domain))


def _expr(e) -> Expr:
    return parse_expr(e) if isinstance(e, str) else as_expr(e)


def control_system(chart: Chart, drift: dict, name: str = ""):
    """Distribution ``{d/dt + f, d/du...}`` and Pfaffian forms ``dx - f dt``.

    Parameters
    ----------
    chart : Chart
        Declares time, states and controls.
    drift : dict
        State variable to its right-hand side.
    """
    comps = {chart.time: ONE}
    for v in chart.states:
        comps[v] = chart.check_expr(drift.get(v, ZERO))
    unknown = set(drift) - set(chart.states)
    if unknown:
        raise ValueError(f"drift given for non-state variable(s) {sorted(unknown)}")
    Z = chart.field(comps, "Z")
    frame = [Z] + [chart.coordinate_field(u) for u in chart.controls]
    D = Distribution(frame, chart, name)
    forms = [chart.form({v: ONE, chart.time: neg(comps[v])}, f"omega_{v}")
             for v in chart.states]
    return D, PfaffianSystem(forms, chart, name), Z


def rebuild_model(m: Model, chart: Chart) -> Model:
    """Re-express every field and form of ``m`` on a compatible chart."""
    def vf(X):
        return VectorField(chart, X.comps, X.name)

    def of(w):
        return OneForm(chart, w.comps, w.name)

    D = Distribution([vf(X) for X in m.distribution.frame], chart, m.distribution.name)
    P = None if m.pfaffian is None else PfaffianSystem([of(w) for w in m.pfaffian.forms],
                                                       chart, m.pfaffian.name)
    return replace(m, chart=chart, distribution=D, pfaffian=P,
                   drift=None if m.drift is None else vf(m.drift),
                   symmetries={k: vf(X) for k, X in m.symmetries.items()})


def _fresh(name, taken):
    if name not in taken:
        return name
    i = 1
    while f"{name}_{i}" in taken:
        i += 1
    return f"{name}_{i}"


def prolong(m: Model, control: str, times: int, prefix: str = "v"):
    """Differentiate a control ``times`` times.

    The control becomes a state; chain variables ``v1 .. v_times`` are
    appended, the last one being the new control.  Names that clash with
    existing variables get a numeric suffix; the returned list of renames
    reports them.

    Returns
    -------
    Model
        The prolonged model.  Symmetries without a component along the
        prolonged control are carried over.
    """
    chart = m.chart
    if control not in chart.controls:
        raise ValueError(f"{control!r} is not a control of {m.name}")
    if times < 1:
        raise ValueError("times must be at least 1")
    if m.drift is None:
        raise ValueError("prolongation needs a model given by a drift field")
    taken = set(chart.variables)
    new, renamed = [], []
    for i in range(1, times + 1):
        want = f"{prefix}{i}"
        got = _fresh(want, taken)
        if got != want:
            renamed.append((want, got))
        taken.add(got)
        new.append(got)
    variables = list(chart.variables) + new
    states = list(chart.states) + [control] + new[:-1]
    controls = [new[-1] if u == control else u for u in chart.controls]
    box = dict(chart.domain.box)
    domain = replace(chart.domain, box=box)
    nchart = Chart(variables, chart.time, states, controls, domain, chart.singular)
    drift = {v: m.drift[v] for v in chart.states}
    chain = [control] + new
    for a, b in zip(chain[:-1], chain[1:]):
        drift[a] = var(b)
    D, P, Z = control_system(nchart, drift, f"pr {m.distribution.name}")
    syms = {}
    ci = chart.index[control]
    for k, X in m.symmetries.items():
        if X.comps[ci] is ZERO:
            syms[k] = VectorField(nchart, list(X.comps) + [ZERO] * times, X.name)
    label = f"{control}:{times}"
    gamma = tuple(g for g in m.gamma if g in syms)
    pm = Model(f"{m.name}", nchart, D, P, Z, syms, gamma, None, {}, None, (),
               {}, m.expected, dict(m.params), m.prolonged + (label,), renamed)
    return pm
