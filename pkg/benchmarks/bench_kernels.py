"""Compare the compiled kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--points 20000] [--repeat 5]

Three measurements are reported for each backend:

* evaluation of the encoded bracket components of the prolonged ship,
* batched ranks of random frames,
* one end-to-end classification (run in a subprocess so that the backend
  is selected at import time through ``EDSYM_PURE``).
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from edsym import kernels
from edsym.diffgeo import lie_bracket
from edsym.models import builtin, prolong
from edsym.symexpr import Program

PIPELINE = ("from edsym.models import builtin, prolong; "
            "from edsym.goursat import classify_goursat; "
            "import time; m = prolong(builtin('ship3dof'), 'u2', 4); t = time.perf_counter(); "
            "r = classify_goursat(m.distribution); print(time.perf_counter() - t, r.is_goursat)")


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bracket_program():
    m = prolong(builtin("ship3dof"), "u2", 4)
    frame = m.distribution.frame
    exprs = []
    for i in range(len(frame)):
        for j in range(i + 1, len(frame)):
            exprs.extend(lie_bracket(frame[i], frame[j]).comps)
    return Program(exprs, m.chart.variables), len(m.chart.variables)


def run(points: int, repeat: int) -> list:
    rng = np.random.default_rng(0)
    prog, nvars = bracket_program()
    X = rng.uniform(0.2, 1.2, size=(points, nvars))
    A = rng.standard_normal((points, 6, 11))
    A[:, 5] = A[:, 0] + A[:, 1]
    rows = []
    for backend in ("python", "cython"):
        if backend == "cython" and kernels.BACKEND != "cython":
            rows.append((backend, float("nan"), float("nan"), float("nan")))
            continue
        t_eval = best_of(lambda: prog(X, backend=backend), repeat)
        t_rank = best_of(lambda: kernels.batch_rank(A, backend=backend), repeat)
        env = dict(os.environ, EDSYM_PURE="1" if backend == "python" else "0")
        out = subprocess.run([sys.executable, "-c", PIPELINE], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        rows.append((backend, t_eval, t_rank, float(out[0])))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000, help="sample points per kernel call")
    ap.add_argument("--repeat", type=int, default=5, help="best-of repetitions")
    args = ap.parse_args(argv)
    rows = run(args.points, args.repeat)
    print(f"{'backend':8s} {'evaluate [s]':>13s} {'batch rank [s]':>15s} {'classify [s]':>13s}")
    for name, a, b, c in rows:
        print(f"{name:8s} {a:13.4f} {b:15.4f} {c:13.4f}")
    py, cy = rows
    if np.isfinite(cy[1]):
        print(f"speed-up  {py[1] / cy[1]:12.1f}x {py[2] / cy[2]:14.1f}x {py[3] / cy[3]:12.1f}x")


if __name__ == "__main__":
    main()
