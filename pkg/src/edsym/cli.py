"""Command-line interface.

Verbs
-----
analyze      refined derived type and signature
classify     Goursat / relative Goursat verdicts, optional ESFT conditions
quotient     linearizable-quotient test and, when invariants are known, the quotient
plan         closed-form ship trajectory along the graph (x(t), t)
verify       residuals of the ship forms along a CSV trajectory
list-models  built-in model names

Exit codes: 0 on success, 2 when the input is not totally regular at the
sample points, 1 on any error (including a failed verification).
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__
from .diffgeo import Distribution, NotTotallyRegular
from .goursat import (classify_goursat, classify_relative_goursat, esft_conditions,
                      matches_partial_prolongation, refined_derived_type)
from .models import DESCRIPTIONS, builtin, list_models, prolong, scenario
from .models.modelfile import ModelFileError, load_model
from .models.planner import (PlannerError, SurfacePath, plan_ship_path, read_csv,
                             verify_trajectory, write_csv)
from .reduction import ReductionError, SymmetryAlgebra, check_linearizable_quotient, quotient
from .report import (compare_expected, dumps, esft_section, goursat_section, new_report)
from .symexpr import ParseError

EXIT_OK, EXIT_ERROR, EXIT_IRREGULAR = 0, 1, 2


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# model loading
# ---------------------------------------------------------------------------

def _load(args):
    if args.builtin and args.model:
        raise CliError("give either --builtin or --model, not both")
    if args.model:
        m = load_model(args.model, samples=args.samples, seed=args.seed)
        ref = {"source": "file", "ref": args.model}
    else:
        name = args.builtin or getattr(args, "default_model", None)
        if not name:
            raise CliError("a model is required (--builtin NAME or --model FILE)")
        m = builtin(name, samples=args.samples, seed=args.seed)
        ref = {"source": "builtin", "ref": name}
    for spec in getattr(args, "prolong", None) or []:
        try:
            control, times = spec.split(":")
            times = int(times)
        except ValueError:
            raise CliError(f"--prolong expects CONTROL:TIMES, got {spec!r}") from None
        m = prolong(m, control, times)
    return m, ref


def _symmetries(args, m):
    if not getattr(args, "symmetries", None):
        return ()
    names = tuple(s.strip() for s in args.symmetries.split(",") if s.strip())
    m.symmetry_fields(names)  # raises on unknown names
    return names


def _model_block(m, ref, names=()):
    ch = m.chart
    return {"name": m.name, "source": ref["source"], "ref": ref["ref"],
            "dim": ch.dim, "variables": list(ch.variables), "states": list(ch.states),
            "controls": list(ch.controls), "prolonged": list(m.prolonged),
            "renamed": [list(r) for r in m.renamed], "symmetries": list(names)}


def _target(m, names):
    if not names:
        return m.distribution
    return Distribution(m.distribution.frame + tuple(m.symmetry_fields(names)), m.chart,
                        f"{m.distribution.name}+Gamma")


def _expected(m, names):
    return m.expected.get(scenario(m.prolonged, names))


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_analyze(args, rep):
    m, ref = _load(args)
    names = _symmetries(args, m)
    rep["model"] = _model_block(m, ref, names)
    relative = args.relative or bool(names)
    try:
        rdt = refined_derived_type(_target(m, names))
    except NotTotallyRegular as exc:
        rep["status"] = "NOT-TOTALLY-REGULAR"
        rep["diagnostics"] = [str(exc)]
        return [str(exc)]
    sig = matches_partial_prolongation(rdt, relative=relative, dim=m.chart.dim)
    rep["analysis"] = {"rdt": rdt.levels(), "k": rdt.k,
                       "signature": str(sig) if sig else None,
                       "deceleration": list(sig.decel) if sig else None,
                       "velocity": list(sig.velocity) if sig else None,
                       "relative": relative}
    lines = [f"model: {m.name} (dim {m.chart.dim})", f"rdt: {rdt.levels()}",
             f"signature: {sig if sig else 'none (not a partial prolongation type)'}"]
    exp = _expected(m, names)
    if exp and exp.get("rdt") is not None:
        ok = exp["rdt"] == rdt.levels()
        rep["expected"] = {"origin": exp.get("origin", "user"), "match": ok,
                           "mismatches": [] if ok else [f"rdt: expected {exp['rdt']}"]}
        lines.append(f"expected: {'match' if ok else 'MISMATCH'}")
    return lines


def cmd_classify(args, rep):
    m, ref = _load(args)
    names = _symmetries(args, m)
    rep["model"] = _model_block(m, ref, names)
    relative = args.relative or bool(names)
    D = _target(m, names)
    g = classify_relative_goursat(D) if relative else classify_goursat(D)
    rep["status"] = g.status
    lines = [f"model: {m.name} (dim {m.chart.dim})"]
    if g.status != "OK":
        rep["diagnostics"] = list(g.diagnostics)
        return lines + list(g.diagnostics)
    rep["analysis"] = goursat_section(g)
    rep["diagnostics"] = list(g.diagnostics)
    es = None
    if args.esft:
        try:
            es = esft_conditions(m.distribution, m.symmetry_fields(names) if names else None)
        except NotTotallyRegular as exc:
            rep["status"] = "NOT-TOTALLY-REGULAR"
            rep["diagnostics"].append(str(exc))
            return lines + [str(exc)]
        rep["esft"] = esft_section(es)
    exp = _expected(m, names)
    if exp:
        rep["expected"] = compare_expected(exp, g, es)
    kind = "relative goursat" if relative else "goursat"
    lines += [f"rdt: {g.rdt.levels()}",
              f"signature: {g.signature if g.signature else 'none'}",
              f"{kind}: {str(g.is_goursat).lower()}"]
    lines += [f"reason: {d}" for d in g.diagnostics]
    if es is not None:
        lines.append(f"esft: {es.scope}" if es.scope else
                     f"esft: ({str(es.controls_in_cauchy).lower()}, "
                     f"{str(es.dt_annihilates).lower()})")
    if "expected" in rep:
        lines.append("expected: " + ("match" if rep["expected"]["match"] else
                                     "MISMATCH " + "; ".join(rep["expected"]["mismatches"])))
    return lines


def cmd_quotient(args, rep):
    m, ref = _load(args)
    names = _symmetries(args, m) or tuple(m.gamma)
    if not names:
        raise CliError("no symmetries given and the model has no default set")
    rep["model"] = _model_block(m, ref, names)
    G = SymmetryAlgebra(m.symmetry_fields(names), names, target=m.distribution)
    qr = check_linearizable_quotient(m.distribution, G)
    g = qr.goursat
    rep["status"] = g.status
    rep["analysis"] = goursat_section(g) if g.status == "OK" else None
    rep["esft"] = esft_section(qr.esft)
    rep["diagnostics"] = list(g.diagnostics) + list(qr.diagnostics)
    lines = [f"model: {m.name}, generators {', '.join(names)} (dim {G.dim})"]
    if g.status != "OK":
        return lines + list(rep["diagnostics"])
    block = {"generators": list(names), "dim": G.dim, "abelian": G.is_abelian,
             "admissible": qr.admissible, "transverse": qr.transverse,
             "transverse_derived": qr.transverse_derived, "free": qr.free,
             "preconditions_ok": qr.preconditions_ok,
             "linearizable": bool(qr.preconditions_ok and g.is_goursat),
             "constructed": False}
    data = m.reduction_data(names)
    if data is not None:
        Q = quotient(m.distribution, G, data["invariants"], data.get("section"),
                     singular=data.get("singular", ()))
        block.update({"constructed": True,
                      "variables": list(Q.chart.variables), "states": list(Q.chart.states),
                      "controls": list(Q.chart.controls),
                      "invariants": {w: str(e) for w, e in Q.q.items()},
                      "forms": Q.form_strings(), "checks": dict(Q.checks)})
    else:
        block["note"] = "no invariants known for these generators; verdicts only"
    rep["quotient"] = block
    exp = _expected(m, names)
    if exp:
        rep["expected"] = compare_expected(exp, g, qr.esft)
    es = qr.esft
    lines += [f"rdt(V+Gamma): {g.rdt.levels()}",
              f"signature: {g.signature if g.signature else 'none'}",
              f"linearizable quotient: {str(block['linearizable']).lower()}",
              "esft: " + (es.scope if es is not None and es.scope else
                          "none" if es is None else
                          f"({str(es.controls_in_cauchy).lower()}, {str(es.dt_annihilates).lower()})")]
    lines += [f"reason: {d}" for d in rep["diagnostics"]]
    if block["constructed"]:
        lines.append("quotient forms: " + ", ".join(block["forms"]))
        lines.append("checks: " + ", ".join(f"{k}={str(v).lower()}" for k, v in block["checks"].items()))
    return lines


def _trajectory_block(tr, out=None):
    d = {"status": tr.status, "n": int(len(tr.t)),
         "t0": float(tr.t[0]), "t1": float(tr.t[-1]),
         "method": tr.method or None,
         "residual": dict(tr.residual),
         "max_residual": tr.max_residual if tr.residual else None}
    for key in ("residual_fd", "unbounded_controls", "breakdown_t", "reason", "path", "u1_bound"):
        if key in tr.metadata:
            d[key] = tr.metadata[key]
    if tr.channels:
        d["initial"] = {k: float(v[0]) for k, v in tr.channels.items()}
        d["final"] = {k: float(v[-1]) for k, v in tr.channels.items()}
    if tr.g is not None:
        d["g_initial"] = [float(v) for v in tr.g[0]]
        d["g_final"] = [float(v) for v in tr.g[-1]]
    if out:
        d["csv"] = out
    return d


def cmd_plan(args, rep):
    args.default_model = "ship3dof"
    m, ref = _load(args)
    rep["model"] = _model_block(m, ref)
    try:
        path = SurfacePath(args.path, args.t0, args.t1, args.n)
    except ParseError as exc:
        raise CliError(f"--path: {exc}") from None
    tr = plan_ship_path(path, model=m, bound=args.bound)
    rep["status"] = tr.status
    if tr.status == "OK" and args.out:
        write_csv(tr, args.out)
    rep["trajectory"] = _trajectory_block(tr, args.out if tr.status == "OK" else None)
    lines = [f"path: x(t) = {tr.metadata.get('path', args.path)} on [{args.t0}, {args.t1}], "
             f"{args.n} points", f"status: {tr.status}"]
    if tr.status == "OK":
        lines.append(f"max residual ({tr.method}): {tr.max_residual:.3g}")
        for w in tr.metadata.get("unbounded_controls", []):
            lines.append(f"warning: |u1| exceeds {w['bound']:g} beyond t = {w['t']:.9g} "
                         f"({w['side']} end)")
        if args.out:
            lines.append(f"wrote {args.out}")
    else:
        lines.append(tr.metadata.get("reason", "controls unbounded inside the interval"))
    return lines


def cmd_verify(args, rep):
    args.default_model = "ship3dof"
    m, ref = _load(args)
    rep["model"] = _model_block(m, ref)
    tr = read_csv(args.trajectory)
    vr = verify_trajectory(m, tr)
    rep["verification"] = {"file": args.trajectory, "n": int(len(tr.t)), "method": vr.method,
                           "threshold": vr.threshold, "residual": dict(vr.residual),
                           "max_residual": vr.max_residual, "verdict": vr.verdict}
    rep["status"] = "OK" if vr.passed else "FAIL"
    return [f"{args.trajectory}: {len(tr.t)} points, max residual {vr.max_residual:.3g} "
            f"({vr.method}, threshold {vr.threshold:g}): {vr.verdict}"]


def cmd_list(args, rep):
    rep["model"] = None
    rep["models"] = [{"name": n, "description": DESCRIPTIONS.get(n, "")} for n in list_models()]
    return [f"{n:20s} {DESCRIPTIONS.get(n, '')}" for n in list_models()]


# ---------------------------------------------------------------------------
# parser and driver
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--builtin", metavar="NAME", help="built-in model, e.g. hsm or contact(0,1,1)")
    common.add_argument("--model", metavar="FILE", help="TOML model file")
    common.add_argument("--seed", type=int, default=42, help="sample-point seed (default 42)")
    common.add_argument("--samples", type=int, default=7, help="number of sample points (default 7)")
    common.add_argument("--json", metavar="FILE", help="write the JSON report ('-' for stdout)")
    common.add_argument("--quiet", action="store_true", help="suppress the text summary")
    common.add_argument("--prolong", action="append", metavar="CONTROL:TIMES",
                        help="prolong a control before analysis (repeatable)")

    p = argparse.ArgumentParser(prog="edsym", description="Goursat classification, symmetry "
                                "reduction and ship trajectory planning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="refined derived type and signature")
    a.add_argument("--relative", action="store_true", help="relative (Cauchy-shifted) type test")
    a.add_argument("--symmetries", metavar="X1,X2", help="augment by named symmetries")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("classify", parents=[common], help="Goursat verdicts")
    c.add_argument("--relative", action="store_true", help="relative Goursat test")
    c.add_argument("--esft", action="store_true", help="also evaluate the ESFT conditions")
    c.add_argument("--symmetries", metavar="X1,X2", help="augment by named symmetries")
    c.set_defaults(func=cmd_classify)

    q = sub.add_parser("quotient", parents=[common], help="linearizable-quotient test")
    q.add_argument("--symmetries", metavar="X1,X2", help="generators (default: model's set)")
    q.set_defaults(func=cmd_quotient)

    pl = sub.add_parser("plan", parents=[common], help="plan a ship trajectory (x(t), t)")
    pl.add_argument("--path", required=True, metavar="EXPR", help="x(t), e.g. 't^2/2'")
    pl.add_argument("--t0", type=float, default=0.0)
    pl.add_argument("--t1", type=float, default=1.0)
    pl.add_argument("--n", type=int, default=101, help="grid size")
    pl.add_argument("--out", metavar="CSV", help="write t,x,y,theta,z,u1,u2")
    pl.add_argument("--bound", type=float, default=1e3, help="|u1| breakdown bound")
    pl.set_defaults(func=cmd_plan)

    v = sub.add_parser("verify", parents=[common], help="verify a CSV trajectory")
    v.add_argument("trajectory", metavar="CSV")
    v.set_defaults(func=cmd_verify)

    ls = sub.add_parser("list-models", parents=[common], help="list built-in models")
    ls.set_defaults(func=cmd_list)
    return p


def _emit(rep, args, lines):
    if not args.quiet:
        for line in lines:
            print(line)
    if args.json:
        text = dumps(rep)
        if args.json == "-":
            sys.stdout.write(text)
        else:
            with open(args.json, "w") as fh:
                fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    rep = new_report(args.command, None, args.seed, args.samples)
    start = time.perf_counter()
    code = EXIT_OK
    try:
        with np.errstate(all="ignore"):
            lines = args.func(args, rep)
        if rep["status"] == "NOT-TOTALLY-REGULAR":
            code = EXIT_IRREGULAR
        elif rep["status"] != "OK":
            code = EXIT_ERROR
    except (CliError, KeyError, ValueError, ModelFileError, ReductionError, PlannerError,
            NotTotallyRegular, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        if isinstance(exc, NotTotallyRegular):
            rep["status"], code = "NOT-TOTALLY-REGULAR", EXIT_IRREGULAR
        else:
            rep["status"], code = "ERROR", EXIT_ERROR
        rep["error"] = str(msg)
        lines = []
        print(f"error: {msg}", file=sys.stderr)
    rep["timing"] = {"seconds": round(time.perf_counter() - start, 6)}
    _emit(rep, args, lines)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
