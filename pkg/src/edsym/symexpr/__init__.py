"""Minimal computer-algebra kernel.

Immutable, hash-consed expression trees over named real variables with
parsing, rendering, exact differentiation, best-effort simplification and
guarded numeric evaluation.

Examples
--------
>>> from edsym.symexpr import parse_expr, diff, eval_expr
>>> e = parse_expr("u1*cos(theta) - z*sin(theta)")
>>> str(diff(e, "u1"))
'cos(theta)'
>>> round(eval_expr(parse_expr("arccot(1)"), {}), 6)
0.785398
"""
from .calculus import diff, gradient, rebuild, subs, subs_many
from .evaluate import (DomainError, EvaluationError, Evaluator, Program, SingularityError,
                       UnboundVariableError, eval_expr, lambdify)
from .nodes import (ADD, CONST, DIV, FUNC, FUNCTIONS, MINUS_ONE, MUL, NEG, ONE, POW, VAR,
                    ZERO, Expr, add, arccot, arctan, as_expr, const, cos, cot, count_nodes,
                    div, exp, free_symbols, func, ln, mul, neg, normalize, postorder, power,
                    sin, sqrt, sub, symbols, tan, var)
from .parser import ParseError, parse, parse_expr
from .printer import render
from .simplify import simplify
from .zero import SampleDomain, is_zero

# ``eval`` is the name used in the documentation; keep the builtin intact.
evaluate = eval_expr

__all__ = [
    "Expr", "parse", "parse_expr", "render", "diff", "gradient", "subs", "subs_many",
    "simplify", "is_zero", "eval_expr", "evaluate", "SampleDomain", "Evaluator",
    "Program", "lambdify", "normalize", "const", "var", "symbols", "add", "mul", "sub",
    "div", "neg", "power", "func", "sin", "cos", "tan", "cot", "exp", "ln", "sqrt",
    "arctan", "arccot", "ZERO", "ONE", "MINUS_ONE", "ParseError", "EvaluationError",
    "UnboundVariableError", "SingularityError", "DomainError", "free_symbols",
    "count_nodes", "postorder", "rebuild", "as_expr", "FUNCTIONS",
    "CONST", "VAR", "ADD", "MUL", "POW", "NEG", "DIV", "FUNC",
]
