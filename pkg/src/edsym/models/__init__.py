"""Built-in control systems, prolongation and the ship trajectory planner."""
from .base import Model, control_system, prolong
from .builtins import DESCRIPTIONS, builtin, list_models, scenario

__all__ = ["Model", "control_system", "prolong", "builtin", "list_models", "scenario",
           "DESCRIPTIONS"]
