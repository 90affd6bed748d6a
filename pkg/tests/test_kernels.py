import numpy as np
import pytest

from edsym import kernels
from edsym.diffgeo import lie_bracket
from edsym.models import builtin
from edsym.symexpr import Program, parse_expr

cython = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@cython
def test_program_backends_agree(rng):
    m = builtin("ship3dof")
    F = m.distribution.frame
    exprs = [c for i in range(len(F)) for j in range(i + 1, len(F))
             for c in lie_bracket(F[i], F[j]).comps]
    exprs += [parse_expr(s) for s in ("1/x", "ln(x - 0.5)", "sqrt(y)^3", "arccot(z)*exp(-t)",
                                      "x^(1/3)", "(x - 0.5)^(-2)")]
    names = list(m.chart.variables)
    P = Program(exprs, names)
    X = rng.uniform(-0.2, 1.5, size=(500, len(names)))
    X[:5, names.index("x")] = 0.5  # exact singular points
    a = P(X, backend="python")
    b = P(X, backend="cython")
    assert np.array_equal(np.isnan(a), np.isnan(b))
    ok = ~np.isnan(a)
    np.testing.assert_allclose(a[ok], b[ok], rtol=1e-13, atol=1e-15)


@cython
@pytest.mark.parametrize("shape", [(6, 11), (11, 6), (1, 4), (8, 8)])
def test_rank_backends_agree(rng, shape):
    A = rng.standard_normal((200,) + shape)
    A[::3, -1] = A[::3, 0] * 2.0 - A[::3, 1 % shape[0]]
    A[::7] = 0.0
    np.testing.assert_array_equal(kernels.batch_rank(A, backend="python"),
                                  kernels.batch_rank(A, backend="cython"))
    for M in A[:20]:
        assert kernels.matrix_rank(M, backend="python") == kernels.matrix_rank(M, backend="cython")
        assert kernels.matrix_rank(M) == np.linalg.matrix_rank(M)


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=cython)])
def test_roundoff_rows_do_not_add_rank(backend):
    A = np.array([[1.0, 0.5, 0.0], [0.0, 2.0, 1.0], [1e-16, -2e-17, 0.0]])
    assert kernels.matrix_rank(A, backend=backend) == 2
    # a genuinely small but relevant row is still counted
    A[2] = [1e-6, 0.0, 0.0]
    assert kernels.matrix_rank(A, backend=backend) == 3


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.matrix_rank(np.eye(2), backend="fortran")


def test_pure_fallback_pipeline():
    import os
    import subprocess
    import sys

    code = ("from edsym import BACKEND; from edsym.models import builtin; "
            "from edsym.goursat import classify_goursat; "
            "r = classify_goursat(builtin('hsm').distribution); "
            "print(BACKEND, r.rdt.levels(), r.is_goursat)")
    out = subprocess.run([sys.executable, "-c", code], env=dict(os.environ, EDSYM_PURE="1"),
                         capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python [[3, 0], [5, 2, 2], [7, 4, 5], [8, 8]] True"
