"""Exact surface-trajectory planning for the three-state ship.

With unit hydrodynamic constants the ship system has a two-dimensional
abelian symmetry group whose quotient is a Brunovsky system.  Choosing the
quotient solution so that the ship moves along the graph ``(x(t), t)`` gives
closed-form states and controls:

    theta = arccot(x' + x''),    z  = x'' / sqrt(1 + c^2),
    u1 = (1 + x' c) / sqrt(1 + c^2),    u2 = -(x'' + x''') / (1 + c^2),

with ``c = x' + x''``.  The group parameters along such a trajectory are
``g = (-exp(t) x'', x - x'')``.

Trajectories can also be built from an arbitrary quotient solution
``(y, theta) = (p(t), q(t))`` by reconstruction (:func:`general_ship_solution`).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..reduction import (GroupAction, ReductionError, SymmetryAlgebra, form_residuals,
                         quotient, reconstruct)
from ..symexpr import (ONE, Expr, Program, add, arccot, as_expr, diff, div, exp, mul, neg,
                       parse_expr, power, sin, sqrt, var)

CHANNELS = ("t", "x", "y", "theta", "z", "u1", "u2")
BREAKDOWN = "PARAMETRIZATION-BREAKDOWN"
UNSUPPORTED = "UNSUPPORTED"
#: residual thresholds for symbolic and finite-difference verification
TOL_SYMBOLIC = 1e-9
TOL_FD = 1e-6


class PlannerError(ValueError):
    """Invalid path or interval."""


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def central_derivative(f: Callable, t, order: int, h: float) -> np.ndarray:
    """Fourth-order central difference of ``f`` of the given order (1 to 3)."""
    t = np.asarray(t, dtype=float)
    if order == 1:
        return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
    if order == 2:
        return (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h)
                - f(t - 2 * h)) / (12 * h * h)
    if order == 3:
        return (-f(t + 3 * h) + 8 * f(t + 2 * h) - 13 * f(t + h) + 13 * f(t - h)
                - 8 * f(t - 2 * h) + f(t - 3 * h)) / (8 * h ** 3)
    raise ValueError("order must be 1, 2 or 3")


#: step multipliers for derivative orders 1..3 (roundoff grows like h^-order)
FD_STEPS = {1: 1e-4, 2: 1e-3, 3: 5e-3}

# five-point one-sided and off-centre first-derivative stencils on a grid
_EDGE = {
    0: np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
    1: np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0,
}


def grid_derivative(y, t) -> np.ndarray:
    """Fourth-order derivative of samples on a uniform grid.

    Interior points use the five-point central stencil; the two points at
    each end use one-sided five-point stencils.

    Raises
    ------
    PlannerError
        If fewer than 9 points are given or the grid is not uniform.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    n = len(t)
    if n < 9:
        raise PlannerError(f"finite differencing needs at least 9 grid points, got {n}")
    dt = np.diff(t)
    h = dt[0]
    if h <= 0 or np.abs(dt - h).max() > 1e-9 * max(abs(h), 1.0):
        raise PlannerError("finite differencing needs a uniform, increasing grid")
    d = np.empty(n)
    d[2:-2] = (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * h)
    d[0] = _EDGE[0] @ y[:5] / h
    d[1] = _EDGE[1] @ y[:5] / h
    d[-1] = -(_EDGE[0] @ y[-1:-6:-1]) / h
    d[-2] = -(_EDGE[1] @ y[-1:-6:-1]) / h
    return d


# ---------------------------------------------------------------------------
# paths and trajectories
# ---------------------------------------------------------------------------

@dataclass
class SurfacePath:
    """A prescribed surface path ``(x(t), t)``.

    Parameters
    ----------
    x : Expr or str or callable
        Closed-form x-component in ``t``, or a vectorized callable.
    t0, t1 : float
        Time interval.
    n : int
        Grid size.
    derivatives : tuple of callable, optional
        First, second and third derivatives for a callable path.  Missing
        ones are obtained by fourth-order central differences.
    scale : float
        Length scale for the finite-difference steps.
    """

    x: object
    t0: float = 0.0
    t1: float = 1.0
    n: int = 101
    derivatives: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        if isinstance(self.x, str):
            self.x = parse_expr(self.x)
        if isinstance(self.x, Expr):
            extra = set(self.x.free) - {"t"}
            if extra:
                raise PlannerError(f"path may only depend on t, found {sorted(extra)}")
        elif not callable(self.x):
            self.x = as_expr(self.x)
        if not self.t1 > self.t0:
            raise PlannerError("need t1 > t0")
        if self.n < 2:
            raise PlannerError("need at least two grid points")

    @property
    def symbolic(self) -> bool:
        return isinstance(self.x, Expr)

    def grid(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n)

    def exprs(self) -> list:
        """``[x, x', x'', x''']`` as expressions (closed-form paths only)."""
        out = [self.x]
        for _ in range(3):
            out.append(diff(out[-1], "t"))
        return out

    def jet(self, t) -> np.ndarray:
        """Values of ``x, x', x'', x'''`` at ``t``, shape ``(4, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.symbolic:
            return Program(self.exprs(), ["t"])(t[:, None])
        rows = [np.asarray(self.x(t), dtype=float)]
        for k in (1, 2, 3):
            if len(self.derivatives) >= k and self.derivatives[k - 1] is not None:
                rows.append(np.asarray(self.derivatives[k - 1](t), dtype=float))
            else:
                rows.append(central_derivative(self.x, t, k, FD_STEPS[k] * self.scale))
        return np.array(rows)


@dataclass
class PlannedTrajectory:
    """Sampled ship trajectory with its verification data.

    Attributes
    ----------
    t : numpy.ndarray
    channels : dict
        ``x, y, theta, z, u1, u2`` sampled on ``t``.
    exprs : dict
        Closed-form expressions in ``t`` when available.
    g : numpy.ndarray or None
        Group parameters ``(g1, g2)`` along the trajectory.
    residual : dict
        Form name to ``max |s^* omega|``.
    method : str
        ``symbolic`` or ``finite-difference`` (how residuals were computed).
    status : str
    metadata : dict
    """

    t: np.ndarray
    channels: dict
    exprs: dict = field(default_factory=dict)
    g: Optional[np.ndarray] = None
    residual: dict = field(default_factory=dict)
    method: str = ""
    status: str = "OK"
    metadata: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residual.values()) if self.residual else float("nan")

    def table(self) -> np.ndarray:
        """Rows ``t, x, y, theta, z, u1, u2``."""
        cols = [self.t] + [self.channels[c] for c in CHANNELS[1:]]
        return np.column_stack(cols)


@dataclass
class VerificationReport:
    """Residuals of the ship forms along a trajectory."""

    residual: dict
    method: str
    threshold: float

    @property
    def max_residual(self) -> float:
        return max(self.residual.values())

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual < self.threshold)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _unit_ship(model=None):
    from .builtins import ship3dof

    m = model if model is not None else ship3dof()
    if m.params.get("beta", 1.0) != 1.0 or m.params.get("gamma", 1.0) != 1.0:
        return None
    return m


def _channels_from_jet(t, jet):
    x, x1, x2, x3 = jet
    c = x1 + x2
    r = np.sqrt(1.0 + c * c)
    with np.errstate(invalid="ignore", divide="ignore"):
        return {
            "x": x,
            "y": np.array(t, dtype=float),
            "theta": np.pi / 2 - np.arctan(c),
            "z": x2 / r,
            "u1": (1.0 + x1 * c) / r,
            "u2": -(x2 + x3) / (1.0 + c * c),
        }


def path_exprs(x) -> dict:
    """Closed-form channels for a path ``x(t)`` given as an expression."""
    x = parse_expr(x) if isinstance(x, str) else as_expr(x)
    x1 = diff(x, "t")
    x2 = diff(x1, "t")
    x3 = diff(x2, "t")
    c = add(x1, x2)
    den = add(ONE, power(c, 2))
    r = sqrt(den)
    return {"x": x, "y": var("t"), "theta": arccot(c), "z": div(x2, r),
            "u1": div(add(ONE, mul(x1, c)), r), "u2": neg(div(add(x2, x3), den))}


def group_parameters(x) -> dict:
    """Closed-form ``g1 = -exp(t) x''`` and ``g2 = x - x''``."""
    x = parse_expr(x) if isinstance(x, str) else as_expr(x)
    x2 = diff(diff(x, "t"), "t")
    return {"g1": neg(mul(exp(var("t")), x2)), "g2": add(x, neg(x2))}


def _u1_of(path: SurfacePath, t) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        try:
            jet = path.jet(t)
        except (FloatingPointError, ValueError, ArithmeticError):
            return np.full(np.size(t), np.nan)
        return _channels_from_jet(t, jet)["u1"]


def _bad(u, bound):
    return ~np.isfinite(u) | (np.abs(u) > bound)


def _probe_window(path: SurfacePath, bound: float, side: str, reach: float = 0.25,
                  steps: int = 400) -> Optional[dict]:
    """Look past one end of the interval for the onset of unbounded controls."""
    length = path.t1 - path.t0
    edge = path.t1 if side == "right" else path.t0
    sign = 1.0 if side == "right" else -1.0
    ts = edge + sign * np.linspace(0.0, reach * length, steps + 1)[1:]
    bad = _bad(_u1_of(path, ts), bound)
    if not bad.any():
        return None
    i = int(np.argmax(bad))
    good = edge if i == 0 else ts[i - 1]
    worse = ts[i]
    for _ in range(60):
        mid = 0.5 * (good + worse)
        if _bad(_u1_of(path, np.array([mid])), bound)[0]:
            worse = mid
        else:
            good = mid
    return {"side": side, "t": float(good), "bound": float(bound),
            "margin": float(abs(good - edge))}


def plan_ship_path(path: SurfacePath, model=None, bound: float = 1e3,
                   probe: bool = True, verify: bool = True) -> PlannedTrajectory:
    """Closed-form ship trajectory following the graph ``(x(t), t)``.

    Parameters
    ----------
    path : SurfacePath
    model : Model, optional
        Ship model; must have unit constants (the default).
    bound : float
        Controls with ``|u1| > bound`` count as a parametrization breakdown.
    probe : bool
        Look up to a quarter of the interval length beyond each end for the
        onset of unbounded controls and report it in the metadata.
    verify : bool
        Attach the residuals of the ship forms.

    Returns
    -------
    PlannedTrajectory
        Status ``OK``, ``PARAMETRIZATION-BREAKDOWN`` when the controls blow up
        inside the interval, or ``UNSUPPORTED`` for non-unit constants.
    """
    m = _unit_ship(model)
    t = path.grid()
    if m is None:
        return PlannedTrajectory(t, {}, status=UNSUPPORTED,
                                 metadata={"reason": "closed-form planning needs beta = gamma = 1"})
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        jet = path.jet(t)
        ch = _channels_from_jet(t, jet)
    exprs = path_exprs(path.x) if path.symbolic else {}
    g = np.column_stack([-np.exp(t) * jet[2], jet[0] - jet[2]])
    tr = PlannedTrajectory(t, ch, exprs, g, metadata={"path": _describe(path),
                                                      "u1_bound": bound})
    bad = _bad(ch["u1"], bound) | ~np.isfinite(ch["theta"]) | ~np.isfinite(ch["u2"])
    if bad.any():
        tr.status = BREAKDOWN
        tr.metadata["breakdown_t"] = [float(v) for v in t[bad][:1]] + [float(t[bad][-1])]
        return tr
    if probe:
        windows = [w for w in (_probe_window(path, bound, "left"),
                               _probe_window(path, bound, "right")) if w]
        if windows:
            tr.metadata["unbounded_controls"] = windows
    if verify:
        rep = verify_trajectory(m, tr)
        tr.residual, tr.method = rep.residual, rep.method
        if path.n >= 9:
            tr.metadata["residual_fd"] = verify_trajectory(m, tr, method="fd").residual
    return tr


def _describe(path: SurfacePath) -> str:
    from ..symexpr import render

    return render(path.x) if path.symbolic else getattr(path.x, "__name__", "callable")


def verify_trajectory(model, tr: PlannedTrajectory, method: str = "auto") -> VerificationReport:
    """Evaluate every ship form along a trajectory.

    Parameters
    ----------
    model : Model
        Provides the Pfaffian system.
    tr : PlannedTrajectory
    method : {"auto", "symbolic", "fd"}
        ``auto`` differentiates closed-form channels symbolically when all
        of them are available, and uses grid finite differences otherwise.
    """
    P = model.pfaffian
    chart = P.chart
    names = [v for v in chart.variables if v != chart.time]
    missing = [v for v in names if v not in tr.channels]
    if missing:
        raise PlannerError(f"trajectory lacks channel(s) {missing}")
    symbolic = all(v in tr.exprs for v in names)
    if method == "symbolic" and not symbolic:
        raise PlannerError("trajectory has no closed-form channels")
    use_sym = symbolic and method in ("auto", "symbolic")
    t = np.asarray(tr.t, dtype=float)
    chans = {chart.time: t}
    chans.update({v: np.asarray(tr.channels[v], dtype=float) for v in names})
    derivs = {chart.time: np.ones_like(t)}
    if use_sym:
        prog = Program([diff(as_expr(tr.exprs[v]), chart.time) for v in names], [chart.time])
        vals = prog(t[:, None])
        derivs.update({v: vals[i] for i, v in enumerate(names)})
        thr = TOL_SYMBOLIC
    else:
        derivs.update({v: grid_derivative(chans[v], t) for v in names})
        thr = TOL_FD
    res = form_residuals(P, chans, derivs)
    return VerificationReport(res, "symbolic" if use_sym else "finite-difference", thr)


# ---------------------------------------------------------------------------
# general solutions by reconstruction
# ---------------------------------------------------------------------------

def ship_reduction(model=None):
    """Quotient, verified action and symmetry algebra of the unit ship."""
    m = _unit_ship(model)
    if m is None:
        raise PlannerError("reconstruction needs the unit-constant ship")
    G = SymmetryAlgebra(m.symmetry_fields(), m.gamma, target=m.distribution)
    Q = quotient(m.distribution, G, m.invariants, m.section, forms=m.pfaffian,
                 singular=m.quotient_singular)
    A = GroupAction(m.chart, m.action["params"], m.action["components"])
    A.verify(G)
    return m, Q, A


def general_ship_solution(p, q, t0: float = 0.0, t1: float = 1.0, n: int = 101,
                          g0=None, model=None, min_sin: float = 1e-6) -> PlannedTrajectory:
    """Ship trajectory with ``y = p(t)`` and ``theta = q(t)``.

    The quotient solution is ``(w1, w2, w3, w4) = (p, q, q', p'/sin q)``;
    the group parameters are obtained by quadrature.

    Parameters
    ----------
    p, q : Expr or str
        Smooth functions of ``t``.
    g0 : sequence of float, optional
        ``(g1, g2)`` at ``t0``; default zero.

    Raises
    ------
    PlannerError
        If ``sin q`` comes close to zero on the interval.
    """
    p = parse_expr(p) if isinstance(p, str) else as_expr(p)
    q = parse_expr(q) if isinstance(q, str) else as_expr(q)
    tt = np.linspace(t0, t1, max(n, 201))
    sq = Program([sin(q)], ["t"])(tt[:, None])[0]
    if not np.all(np.isfinite(sq)) or np.abs(sq).min() < min_sin:
        raise PlannerError("sin(q) vanishes on the interval (singular chart locus)")
    m, Q, A = ship_reduction(model)
    qsol = {"w1": p, "w2": q, "w3": diff(q, "t"), "w4": div(diff(p, "t"), sin(q))}
    try:
        rec = reconstruct(Q, A, qsol, t0, t1, n, g0=g0, forms=m.pfaffian)
    except ReductionError as exc:
        raise PlannerError(str(exc)) from exc
    ch = {v: rec.channels[v] for v in CHANNELS[1:]}
    tr = PlannedTrajectory(rec.t, ch, g=rec.g, residual=rec.residual, method="reconstruction",
                           status=rec.status,
                           metadata={"quotient_error": rec.quotient_error,
                                     "rates": [str(e) for e in rec.gdot]})
    return tr


def theta_quarter_solution(p) -> dict:
    """Closed-form family with ``theta = pi/4``, ``g1 = pi/4`` and ``g2 = p``."""
    p = parse_expr(p) if isinstance(p, str) else as_expr(p)
    e = exp(neg(var("t")))
    g1 = parse_expr("pi/4")
    s = parse_expr("sqrt(2)/2")
    return {"x": add(neg(mul(g1, e)), p), "y": p, "theta": g1,
            "z": neg(mul(g1, e, s)), "u1": add(mul(g1, e, s), div(diff(p, "t"), s)),
            "u2": as_expr(0)}


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_csv(tr: PlannedTrajectory, path) -> None:
    """Write ``t,x,y,theta,z,u1,u2`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHANNELS)
        for row in tr.table():
            w.writerow(["%.17g" % v for v in row])


def read_csv(path) -> PlannedTrajectory:
    """Read a trajectory written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PlannerError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in CHANNELS if c not in header]
    if missing:
        raise PlannerError(f"{path}: missing column(s) {missing}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise PlannerError(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[0] == 0:
        raise PlannerError(f"{path}: no data rows")
    cols = {h: data[:, i] for i, h in enumerate(header)}
    t = cols["t"]
    if np.any(np.diff(t) <= 0):
        raise PlannerError(f"{path}: time column is not strictly increasing")
    return PlannedTrajectory(t, {c: cols[c] for c in CHANNELS[1:]})
