"""Tangent SDE solvers along a frozen base ensemble."""
from src.tangents.solvers import (
    solve_damped_tangent,
    solve_fundamental_K,
    solve_lions_tangent,
    solve_malliavin_tangent,
    solve_multiplicative_aux,
)
from src.tangents.types import ControlPath, FundamentalMatrices, TangentKind, TangentPaths, constant_control

__all__ = [
    "solve_damped_tangent",
    "solve_fundamental_K",
    "solve_lions_tangent",
    "solve_malliavin_tangent",
    "solve_multiplicative_aux",
    "ControlPath",
    "FundamentalMatrices",
    "TangentKind",
    "TangentPaths",
    "constant_control",
]
