"""HiGHS (via scipy) as an alternative engine behind the same contracts."""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from ..errors import NumericalFailure
from .lp import EQ, GE, LE, LpProblem, LpSolution


def _row_bounds(prob: LpProblem):
    A, b, senses = prob.sparse_matrix()
    lb = np.where([s in (GE, EQ) for s in senses], b, -np.inf)
    ub = np.where([s in (LE, EQ) for s in senses], b, np.inf)
    return A, lb, ub


def solve_lp_highs(prob: LpProblem, lo: np.ndarray, hi: np.ndarray) -> LpSolution:
    A, lb, ub = _row_bounds(prob)
    eq = np.isfinite(lb) & np.isfinite(ub) & (lb == ub)
    ineq_ub = np.isfinite(ub) & ~eq
    ineq_lb = np.isfinite(lb) & ~eq
    A_ub = sparse.vstack([A[ineq_ub], -A[ineq_lb]], format="csr")
    b_ub = np.concatenate([ub[ineq_ub], -lb[ineq_lb]])
    has_ub = A_ub.shape[0] > 0
    A_eq = A[eq] if eq.any() else None
    b_eq = ub[eq] if A_eq is not None else None
    bounds = [(None if not math.isfinite(l) else l, None if not math.isfinite(h) else h)
              for l, h in zip(lo, hi)]
    res = linprog(prob.c, A_ub=A_ub if has_ub else None, b_ub=b_ub if has_ub else None,
                  A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        return LpSolution("Infeasible", np.full(prob.num_vars, np.nan), math.nan, res.nit)
    if res.status == 3:
        return LpSolution("Unbounded", np.full(prob.num_vars, np.nan), -math.inf, res.nit)
    if res.status != 0:
        raise NumericalFailure(f"HiGHS LP failed: {res.message}")
    return LpSolution("Optimal", res.x, float(prob.c @ res.x), int(res.nit))


def solve_mip_highs(prob: LpProblem, node_limit: int | None, mip_gap: float):
    from .mip import MipResult

    A, lb, ub = _row_bounds(prob)
    constraints = [LinearConstraint(A, lb, ub)] if A.shape[0] and A.nnz else []
    options = {"mip_rel_gap": mip_gap}
    if node_limit is not None:
        options["node_limit"] = node_limit
    res = milp(prob.c, constraints=constraints, integrality=prob.binary.astype(int),
               bounds=Bounds(prob.lo, prob.hi), options=options)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2 or res.x is None and res.status != 1:
        return MipResult("Infeasible", np.full(prob.num_vars, np.nan), math.inf, math.inf, nodes)
    if res.x is None:
        raise NumericalFailure(f"HiGHS MIP failed: {res.message}")
    x = res.x.copy()
    x[prob.binary] = np.round(x[prob.binary])
    bound = getattr(res, "mip_dual_bound", None)
    obj = float(prob.c @ x)
    if bound is None or not math.isfinite(bound):
        bound = obj
    status = "Optimal" if res.status == 0 else "NodeLimit"
    return MipResult(status, x, obj, min(float(bound), obj), nodes)
