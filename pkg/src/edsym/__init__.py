"""Symbolic-numeric tools for Goursat classification of control systems,
symmetry reduction and trajectory planning for under-actuated ships.

Subpackages
-----------
symexpr
    Expression kernel (parse, diff, simplify, evaluate).
diffgeo
    Vector fields, forms, distributions, derived flags, Cauchy bundles.
goursat
    Refined derived type, signatures, Goursat and relative Goursat tests.
reduction
    Symmetry verification, quotients, reconstruction by quadrature.
models
    Built-in systems, prolongation and the ship path planner.
cli
    Command-line interface.
"""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
