import numpy as np
import pytest
import sympy as sp

from edsym.models import builtin
from edsym.models.planner import (BREAKDOWN, UNSUPPORTED, PlannedTrajectory, PlannerError,
                                  SurfacePath, central_derivative, general_ship_solution,
                                  grid_derivative, group_parameters, path_exprs,
                                  plan_ship_path, read_csv, theta_quarter_solution,
                                  verify_trajectory, write_csv)
from edsym.symexpr import Program, render

T = sp.Symbol("t")
GRID = np.linspace(0.05, 1.95, 20)


def _eval(e, t):
    return Program([e], ["t"])(np.asarray(t, dtype=float)[:, None])[0]


def _sym(e):
    return sp.sympify(render(e).replace("^", "**"),
                      locals={"arccot": sp.acot, "pi": sp.pi, "t": T})


def test_closed_forms_solve_ship_equations():
    # independent oracle: the channels satisfy the unit ship equations for any x(t)
    x = sp.Function("x")(T)
    x1, x2, x3 = (sp.diff(x, T, k) for k in (1, 2, 3))
    c = x1 + x2
    r = sp.sqrt(1 + c**2)
    # theta = arccot(c) lies in (0, pi): sin = 1/r, cos = c/r, theta' = -c'/(1 + c^2)
    sin_th, cos_th = 1 / r, c / r
    z = x2 / r
    u1 = (1 + x1 * c) / r
    u2 = -(x2 + x3) / (1 + c**2)
    eqs = [sp.diff(x, T) - (u1 * cos_th - z * sin_th),
           1 - (u1 * sin_th + z * cos_th),
           -sp.diff(c, T) / (1 + c**2) - u2,
           sp.diff(z, T) - (-u1 * u2 - z)]
    for e in eqs:
        assert sp.simplify(e) == 0
    # the same formulas evaluated through the package on a concrete path
    ex = path_exprs("t^3/3 + sin(t)")
    subs = {x: T**3 / 3 + sp.sin(T)}
    for name, ref in {"z": z, "u1": u1, "u2": u2}.items():
        f = sp.lambdify(T, ref.subs(subs).doit(), "numpy")
        np.testing.assert_allclose(_eval(ex[name], GRID), f(GRID), rtol=1e-10)


@pytest.mark.parametrize("lam,mu", [(0, 0), (1, 2), (2, -1), (-0.5, 3)])
def test_line_closed_form(lam, mu):
    ex = path_exprs(f"{lam}*t + {mu}")
    theta = np.pi / 2 - np.arctan(lam)
    np.testing.assert_allclose(_eval(ex["theta"], GRID), theta, rtol=1e-10)
    np.testing.assert_allclose(_eval(ex["z"], GRID), 0.0, atol=1e-15)
    np.testing.assert_allclose(_eval(ex["u1"], GRID), np.sqrt(1 + lam * lam), rtol=1e-10)
    np.testing.assert_allclose(_eval(ex["u2"], GRID), 0.0, atol=1e-15)


@pytest.mark.parametrize("lam", [0, 1, 2])
def test_line_surge_speed(lam):
    tr = plan_ship_path(SurfacePath(f"{lam}*t", 0, 2, 21))
    np.testing.assert_allclose(tr.channels["u1"], np.sqrt(1 + lam**2), rtol=1e-12)


def test_parabola_closed_form():
    ex = path_exprs("t^2/2")
    q = 2 + 2 * GRID + GRID**2
    want = {"theta": np.pi / 2 - np.arctan(GRID + 1), "z": 1 / np.sqrt(q),
            "u1": (1 + GRID + GRID**2) / np.sqrt(q), "u2": -1 / q}
    for k, v in want.items():
        np.testing.assert_allclose(_eval(ex[k], GRID), v, rtol=1e-10, err_msg=k)
    # symbolic agreement as well
    assert sp.simplify(_sym(ex["u2"]) + 1 / (2 + 2 * T + T**2)) == 0
    assert _eval(ex["u2"], [0.0])[0] == pytest.approx(-0.5, rel=1e-15)


@pytest.mark.parametrize("sign", [1, -1])
def test_semicircle_closed_form(sign):
    ex = path_exprs(f"{sign}*sqrt(1 - t^2)")
    tt = np.linspace(-0.95, 0.95, 20)
    a = np.arctan((tt**3 - tt - 1) / (1 - tt**2) ** 1.5)
    np.testing.assert_allclose(_eval(ex["theta"], tt), np.pi / 2 - sign * a, rtol=1e-10)
    # z = x'' / sqrt(1 + c^2), u1 = (1 + x' c) / sqrt(1 + c^2) by direct derivation
    x = sign * sp.sqrt(1 - T**2)
    c = sp.diff(x, T) + sp.diff(x, T, 2)
    zf = sp.lambdify(T, sp.diff(x, T, 2) / sp.sqrt(1 + c**2))
    uf = sp.lambdify(T, (1 + sp.diff(x, T) * c) / sp.sqrt(1 + c**2))
    np.testing.assert_allclose(_eval(ex["z"], tt), zf(tt), rtol=1e-10)
    np.testing.assert_allclose(_eval(ex["u1"], tt), uf(tt), rtol=1e-10)
    if sign == 1:
        # the alternative surge expression differs by an overall sign
        shown = (tt**2 - tt - 1) / (np.sqrt(2 - 2 * tt**2 + tt**4 + 2 * tt - 2 * tt**3)
                                    * np.sqrt(1 - tt**2))
        np.testing.assert_allclose(_eval(ex["u1"], tt), -shown, rtol=1e-10)


def test_group_parameters_closed_form():
    g = group_parameters("t^2/2")
    np.testing.assert_allclose(_eval(g["g1"], GRID), -np.exp(GRID), rtol=1e-14)
    np.testing.assert_allclose(_eval(g["g2"], GRID), GRID**2 / 2 - 1, atol=1e-14)


@pytest.mark.parametrize("path", ["t + 1", "0.5*t - 2", "t^2/2"])
def test_trajectory_residuals(path):
    tr = plan_ship_path(SurfacePath(path, 0.0, 2.0, 201))
    assert tr.status == "OK" and tr.method == "symbolic"
    assert tr.max_residual < 1e-9
    assert max(tr.metadata["residual_fd"].values()) < 1e-6


def test_callable_path_uses_finite_differences():
    tr = plan_ship_path(SurfacePath(lambda t: t**2 / 2, 0.0, 2.0, 201))
    assert tr.method == "finite-difference"
    assert tr.max_residual < 1e-6
    line = plan_ship_path(SurfacePath(lambda t: 2 * t + 1, 0.0, 2.0, 201,
                                      derivatives=(lambda t: 2 + 0 * t,)))
    assert line.max_residual < 1e-6


def test_corrupted_channel_fails_verification():
    m = builtin("ship3dof")
    tr = plan_ship_path(SurfacePath("t^2/2", 0.0, 2.0, 201))
    bad = PlannedTrajectory(tr.t, dict(tr.channels, z=tr.channels["z"] * 1.01))
    rep = verify_trajectory(m, bad)
    assert rep.method == "finite-difference" and rep.verdict == "FAIL"
    zeroed = PlannedTrajectory(tr.t, dict(tr.channels, z=np.zeros_like(tr.t)))
    rep0 = verify_trajectory(m, zeroed)
    assert rep0.verdict == "FAIL"
    # the x and y residuals pick up |z| sin(theta) and |z| cos(theta)
    assert rep0.max_residual > 0.5 * np.abs(tr.channels["z"]).max()
    assert verify_trajectory(m, tr).verdict == "PASS"
    with pytest.raises(PlannerError, match="no closed-form"):
        verify_trajectory(m, bad, method="symbolic")
    with pytest.raises(PlannerError, match="lacks"):
        verify_trajectory(m, PlannedTrajectory(tr.t, {"x": tr.channels["x"]}))


def test_semicircle_breakdown_and_probe():
    tr = plan_ship_path(SurfacePath("sqrt(1 - t^2)", -1.2, 0.9, 181))
    assert tr.status == BREAKDOWN
    assert tr.metadata["breakdown_t"][0] == pytest.approx(-1.2)
    ok = plan_ship_path(SurfacePath("sqrt(1 - t^2)", -0.9, 0.9, 181))
    assert ok.status == "OK" and ok.max_residual < 1e-9
    sides = {w["side"]: w["t"] for w in ok.metadata["unbounded_controls"]}
    assert sides["left"] == pytest.approx(-1.0, abs=1e-5)
    assert sides["right"] == pytest.approx(1.0, abs=1e-5)
    assert "unbounded_controls" not in plan_ship_path(SurfacePath("t^2/2", 0, 2, 21)).metadata


def test_non_unit_ship_is_unsupported():
    tr = plan_ship_path(SurfacePath("t", 0, 1, 11), builtin("ship3dof", beta=2))
    assert tr.status == UNSUPPORTED


def test_path_validation():
    with pytest.raises(PlannerError, match="only depend on t"):
        SurfacePath("t + s")
    with pytest.raises(PlannerError, match="t1 > t0"):
        SurfacePath("t", 1.0, 0.0)
    with pytest.raises(PlannerError, match="two grid points"):
        SurfacePath("t", 0.0, 1.0, 1)


def test_finite_difference_helpers():
    t = np.linspace(0, 1, 41)
    np.testing.assert_allclose(grid_derivative(np.sin(t), t), np.cos(t), atol=1e-6)
    for k, ref in [(1, np.cos), (2, lambda s: -np.sin(s)), (3, lambda s: -np.cos(s))]:
        np.testing.assert_allclose(central_derivative(np.sin, t, k, 1e-2), ref(t), atol=1e-5)
    with pytest.raises(PlannerError, match="at least 9"):
        grid_derivative(t[:8], t[:8])
    with pytest.raises(PlannerError, match="uniform"):
        grid_derivative(t**2, t**2)
    with pytest.raises(ValueError):
        central_derivative(np.sin, t, 4, 1e-2)


def test_general_solution_matches_line_plan():
    g = general_ship_solution("t", "arccot(1)", 0.0, 1.0, 101, g0=[0.0, 1.0])
    line = plan_ship_path(SurfacePath("t + 1", 0.0, 1.0, 101))
    for k in line.channels:
        np.testing.assert_allclose(g.channels[k], line.channels[k], atol=1e-12, err_msg=k)
    assert g.max_residual < 1e-9 and g.metadata["quotient_error"] < 1e-12


def test_quarter_turn_family():
    tq = theta_quarter_solution("sin(t)")
    g = general_ship_solution("sin(t)", "pi/4", 0.0, 1.0, 101, g0=[np.pi / 4, 0.0])
    for k, e in tq.items():
        np.testing.assert_allclose(g.channels[k], _eval(e, g.t), atol=1e-10, err_msg=k)
    np.testing.assert_allclose(g.g[:, 0], np.pi / 4, atol=1e-12)


def test_constant_heading_and_position():
    g = general_ship_solution("1", "pi/2", 0.0, 1.0, 11, g0=[0.5, 0.25])
    np.testing.assert_allclose(g.g, np.tile([0.5, 0.25], (11, 1)), atol=1e-14)
    np.testing.assert_allclose(g.channels["u1"], 0.0, atol=1e-14)
    np.testing.assert_allclose(g.channels["y"], 1.0)


def test_singular_heading_rejected():
    with pytest.raises(PlannerError, match="sin"):
        general_ship_solution("t", "t - 0.5", 0.0, 1.0)


def test_csv_round_trip(tmp_path):
    m = builtin("ship3dof")
    tr = plan_ship_path(SurfacePath("t^2/2", 0.0, 2.0, 201))
    f = tmp_path / "traj.csv"
    write_csv(tr, f)
    back = read_csv(f)
    np.testing.assert_array_equal(back.table(), tr.table())
    rep = verify_trajectory(m, back)
    for k, v in tr.metadata["residual_fd"].items():
        assert rep.residual[k] == pytest.approx(v, abs=1e-12)


def test_csv_errors(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("")
    with pytest.raises(PlannerError, match="empty"):
        read_csv(f)
    f.write_text("t,x\n0,1\n")
    with pytest.raises(PlannerError, match="missing column"):
        read_csv(f)
    f.write_text("t,x,y,theta,z,u1,u2\n1,0,0,0,0,0,0\n0,0,0,0,0,0,0\n")
    with pytest.raises(PlannerError, match="strictly increasing"):
        read_csv(f)
    f.write_text("t,x,y,theta,z,u1,u2\n0,0,0,0,0,0,0\n1,0,0,0,0,0,0\n")
    with pytest.raises(PlannerError, match="at least 9"):
        verify_trajectory(builtin("ship3dof"), read_csv(f))
