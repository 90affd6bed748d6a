"""JSON reports.

Reports are plain dictionaries with a versioned ``schema`` field.  The
serializer writes floats with 17 significant digits, maps NaN and
infinities to ``null`` and sorts nothing: key order is the insertion order
chosen by the builders below, which keeps output byte-stable.
"""
from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

SCHEMA = "edsym.report/1"


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    if x == 0.0:
        return "0.0"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "inf" not in s:
        s += ".0"
    return s


def _emit(obj, out: list, indent: int, level: int) -> None:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append((sep if i else "") + pad + json.dumps(str(k), ensure_ascii=False) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not len(seq):
            out.append("[]")
            return
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        out.append("[")
        for i, v in enumerate(seq):
            if flat:
                out.append(", " if i else "")
            else:
                out.append((sep if i else "") + pad)
            _emit(v, out, indent, level + 1)
        out.append("]" if flat else end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Serialize a report to JSON text."""
    out: list = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def load_schema() -> dict:
    """The shipped JSON schema of reports."""
    text = resources.files("edsym").joinpath("schema/report.schema.json").read_text()
    return json.loads(text)


def without_timing(report: dict) -> dict:
    """Copy of a report with the timing field removed (for comparisons)."""
    return {k: v for k, v in report.items() if k != "timing"}


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def goursat_section(rep) -> dict:
    """Analysis and verdict blocks of a :class:`~edsym.goursat.GoursatReport`."""
    sig = rep.signature
    return {
        "rdt": rep.rdt.levels() if rep.rdt is not None else None,
        "signature": str(sig) if sig is not None else None,
        "deceleration": list(sig.decel) if sig is not None else None,
        "velocity": list(sig.velocity) if sig is not None else None,
        "verdicts": {
            "goursat": bool(rep.is_goursat),
            "relative": bool(rep.relative),
            "matches_partial_prolongation": bool(rep.matches_partial_prolongation),
            "intersections_integrable": {str(k): bool(v)
                                         for k, v in sorted(rep.intersections_integrable.items())},
            "weber": rep.weber,
            "resolvent_integrable": rep.resolvent_integrable,
        },
    }


def esft_section(es) -> dict | None:
    if es is None:
        return None
    return {"controls_in_cauchy": es.controls_in_cauchy, "dt_annihilates": es.dt_annihilates,
            "scope": es.scope or "IN-SCOPE"}


def compare_expected(record: dict, rep, esft=None) -> dict:
    """Compare an expected-results record with computed verdicts.

    Fields missing from the record, or given as ``None``, are not compared.
    """
    mism = []
    if record.get("rdt") is not None:
        got = rep.rdt.levels() if rep.rdt is not None else None
        if got != record["rdt"]:
            mism.append(f"rdt: expected {record['rdt']}, got {got}")
    if "decel" in record:
        got = list(rep.signature.decel) if rep.signature is not None else None
        if record["decel"] != got:
            mism.append(f"deceleration: expected {record['decel']}, got {got}")
    if record.get("goursat") is not None and bool(record["goursat"]) != rep.is_goursat:
        mism.append(f"goursat: expected {record['goursat']}, got {rep.is_goursat}")
    if record.get("resolvent_integrable") is not None:
        if record["resolvent_integrable"] != rep.resolvent_integrable:
            mism.append(f"resolvent_integrable: expected {record['resolvent_integrable']}, "
                        f"got {rep.resolvent_integrable}")
    if esft is not None and record.get("esft") is not None:
        want = record["esft"]
        if isinstance(want, str):
            if esft.scope != want:
                mism.append(f"esft: expected {want}, got {esft.scope or esft.pair()}")
        else:
            for name, w, g in zip(("controls_in_cauchy", "dt_annihilates"), want, esft.pair()):
                if w is not None and w != g:
                    mism.append(f"esft.{name}: expected {w}, got {g}")
    return {"origin": record.get("origin", "user"), "match": not mism, "mismatches": mism}


def new_report(command: str, model: dict | None, seed: int, samples: int) -> dict:
    return {"schema": SCHEMA, "command": command, "model": model, "seed": seed,
            "samples": samples, "status": "OK"}
