"""LP engine and exact 0-1 branch-and-bound."""

from .lp import EQ, GE, LE, LpBuilder, LpProblem, LpSolution, Row, solve_lp
from .mip import MipResult, solve_mip

__all__ = [
    "EQ", "GE", "LE", "LpBuilder", "LpProblem", "LpSolution", "MipResult", "Row",
    "solve_lp", "solve_mip",
]
