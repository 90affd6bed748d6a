import json
import subprocess
import sys
import textwrap

import jsonschema
import pytest

from edsym.cli import main
from edsym.report import dumps, load_schema, without_timing

SCHEMA = load_schema()

KINK = textwrap.dedent("""
    name = "kink"
    [chart]
    variables = ["t", "x", "y", "z", "u"]
    states = ["x", "y", "z"]
    controls = ["u"]
    [chart.box]
    x = [-1.0, 1.0]
    [drift]
    x = "u"
    y = "x + sqrt(x^2)"
    z = "y"
""")


def run(capsys, *argv):
    code = main(list(argv) + ["--json", "-", "--quiet"])
    out = capsys.readouterr()
    rep = json.loads(out.out)
    jsonschema.validate(rep, SCHEMA)
    return code, rep, out.err


def test_analyze_hsm(capsys):
    code, rep, _ = run(capsys, "analyze", "--builtin", "hsm")
    assert code == 0 and rep["status"] == "OK"
    assert rep["analysis"]["rdt"] == [[3, 0], [5, 2, 2], [7, 4, 5], [8, 8]]
    assert rep["analysis"]["signature"] == "<0,1,1>"


def test_classify_prolonged_ship(capsys):
    code, rep, _ = run(capsys, "classify", "--builtin", "ship3dof", "--prolong", "u2:4",
                       "--esft")
    assert code == 0
    assert rep["analysis"]["signature"] == "<0,0,1,0,1>"
    assert rep["analysis"]["verdicts"]["goursat"] is True
    assert rep["model"]["prolonged"] == ["u2:4"]
    assert rep["expected"]["match"] is True


def test_classify_relative_with_symmetries(capsys):
    code, rep, _ = run(capsys, "classify", "--builtin", "martin-rouchon", "--relative",
                       "--symmetries", "X1,X3", "--esft")
    assert code == 0
    assert rep["esft"] == {"controls_in_cauchy": True, "dt_annihilates": False,
                           "scope": "IN-SCOPE"}
    assert rep["expected"]["match"]


def test_quotient_ship(capsys):
    code, rep, _ = run(capsys, "quotient", "--builtin", "ship3dof")
    q = rep["quotient"]
    assert code == 0 and q["constructed"] and q["preconditions_ok"]
    assert q["forms"] == ["dw1 - sin(w2)*w4*dt", "dw2 - w3*dt"]
    assert all(q["checks"].values())
    assert rep["esft"]["scope"] == "OUT-OF-THEOREM-SCOPE"


def test_quotient_without_invariants_adds_note(capsys):
    code, rep, _ = run(capsys, "quotient", "--builtin", "ship6form")
    assert code == 0
    assert rep["quotient"]["constructed"] is False and "note" in rep["quotient"]


def test_plan_and_verify_round_trip(capsys, tmp_path):
    csv = tmp_path / "p.csv"
    code, rep, _ = run(capsys, "plan", "--builtin", "ship3dof", "--path", "t^2/2",
                       "--t0", "0", "--t1", "2", "--n", "201", "--out", str(csv))
    tr = rep["trajectory"]
    assert code == 0 and tr["max_residual"] < 1e-9
    code, rep2, _ = run(capsys, "verify", str(csv), "--builtin", "ship3dof")
    ver = rep2["verification"]
    assert code == 0 and ver["verdict"] == "PASS"
    for k, v in tr["residual_fd"].items():
        assert ver["residual"][k] == pytest.approx(v, abs=1e-12)


def test_verify_corrupted_file_fails(capsys, tmp_path):
    csv = tmp_path / "p.csv"
    run(capsys, "plan", "--builtin", "ship3dof", "--path", "t^2/2", "--n", "101",
        "--out", str(csv))
    lines = csv.read_text().splitlines()
    cells = lines[50].split(",")
    cells[4] = repr(float(cells[4]) + 1e-3)
    lines[50] = ",".join(cells)
    csv.write_text("\n".join(lines) + "\n")
    code, rep, _ = run(capsys, "verify", str(csv), "--builtin", "ship3dof")
    assert code == 1 and rep["verification"]["verdict"] == "FAIL"


def test_plan_breakdown(capsys):
    code, rep, _ = run(capsys, "plan", "--builtin", "ship3dof", "--path", "sqrt(1-t^2)",
                       "--t0", "-1.2", "--t1", "0.5")
    assert code == 1 and rep["status"] == "PARAMETRIZATION-BREAKDOWN"
    assert rep["trajectory"]["breakdown_t"]


def test_list_models(capsys):
    code, rep, _ = run(capsys, "list-models")
    assert code == 0
    assert "hsm" in {m["name"] for m in rep["models"]}


def test_not_totally_regular_exit_code(capsys, tmp_path):
    f = tmp_path / "kink.toml"
    f.write_text(KINK)
    code, rep, err = run(capsys, "classify", "--model", str(f))
    assert code == 2 and rep["status"] == "NOT-TOTALLY-REGULAR"
    assert any("sampled ranks" in d for d in rep["diagnostics"])


@pytest.mark.parametrize("argv,needle", [
    (["analyze", "--builtin", "submarine"], "unknown model"),
    (["analyze"], "a model is required"),
    (["classify", "--builtin", "hsm", "--symmetries", "Q"], "unknown symmetry"),
    (["classify", "--builtin", "hsm", "--prolong", "u1"], "CONTROL:TIMES"),
    (["plan", "--builtin", "ship3dof", "--path", "t+"], ""),
])
def test_error_exit_code(capsys, argv, needle):
    code, rep, err = run(capsys, *argv)
    assert code == 1 and rep["status"] == "ERROR"
    assert needle in rep["error"] and err.startswith("error:")


def test_bad_model_file(capsys, tmp_path):
    f = tmp_path / "bad.toml"
    f.write_text('[chart]\nvariables = ["t","x","u"]\nstates=["x"]\ncontrols=["u"]\n'
                 '[drift]\nx = "q+1"\n')
    code, rep, _ = run(capsys, "analyze", "--model", str(f))
    assert code == 1 and "undeclared variable(s) q" in rep["error"]


def test_reports_are_deterministic(capsys):
    argv = ["classify", "--builtin", "ship6form", "--relative", "--symmetries", "G1,G2",
            "--esft"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert dumps(without_timing(a)) == dumps(without_timing(b))


def test_seed_is_recorded(capsys):
    _, rep, _ = run(capsys, "analyze", "--builtin", "hsm", "--seed", "3", "--samples", "4")
    assert rep["seed"] == 3 and rep["samples"] == 4


def test_text_summary_and_json_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert main(["analyze", "--builtin", "hsm", "--json", str(out)]) == 0
    text = capsys.readouterr().out
    assert "<0,1,1>" in text
    jsonschema.validate(json.loads(out.read_text()), SCHEMA)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "edsym", "analyze", "--builtin", "contact(1,1)",
                          "--json", "-", "--quiet"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["analysis"]["signature"] == "<1,1>"
