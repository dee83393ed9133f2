"""MILP modelling layer and a self-contained LP / branch-and-bound solver."""

from .bnb import TooManyBinaries, brute_force_solve, solve_milp
from .model import (
    AffineExpr,
    Constraint,
    LinearArrays,
    MilpModel,
    ModelError,
    Sense,
    Solution,
    SolveStats,
    Status,
    Variable,
    VarKind,
)
from .mps import export_mps
from .simplex import solve_lp

__all__ = [
    "AffineExpr",
    "Constraint",
    "LinearArrays",
    "MilpModel",
    "ModelError",
    "Sense",
    "Solution",
    "SolveStats",
    "Status",
    "TooManyBinaries",
    "VarKind",
    "Variable",
    "brute_force_solve",
    "export_mps",
    "solve_lp",
    "solve_milp",
]
