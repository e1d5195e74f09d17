"""Best-bound branch-and-bound over the binary columns of an LpProblem."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalFailure
from .lp import LpProblem, solve_lp

INT_TOL = 1e-6
# Relative pruning gap. Kept well below the 1e-6 absolute agreement demanded
# against brute-force path enumeration.
MIP_GAP = 1e-9


@dataclass
class MipResult:
    status: str  # "Optimal" | "Infeasible" | "NodeLimit"
    x: np.ndarray
    objective_value: float
    best_bound: float
    nodes_explored: int

    @property
    def gap(self) -> float:
        if not math.isfinite(self.objective_value):
            return math.inf
        return self.objective_value - self.best_bound


def solve_mip(prob: LpProblem, node_limit: int | None = 100_000, mip_gap: float = MIP_GAP,
              backend: str = "simplex") -> MipResult:
    """Globally optimal 0-1 solution by best-bound branch-and-bound.

    Branches on the most fractional binary (lowest index on ties) and always
    expands the open node with the smallest relaxation bound, first-created
    first on ties, so runs are reproducible node for node. When
    ``node_limit`` is hit the incumbent comes back with status
    ``"NodeLimit"`` and the remaining open bound.
    """
    if backend == "highs":
        from .highs import solve_mip_highs

        return solve_mip_highs(prob, node_limit, mip_gap)
    if backend != "simplex":
        raise ValueError(f"unknown MIP backend {backend!r}")

    binaries = np.flatnonzero(prob.binary)
    lo0 = prob.lo.copy()
    hi0 = prob.hi.copy()
    lo0[binaries] = np.maximum(lo0[binaries], 0.0)
    hi0[binaries] = np.minimum(hi0[binaries], 1.0)

    incumbent_x = None
    incumbent = math.inf
    nodes = 0
    counter = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = []
    floor = math.inf  # smallest bound among subtrees pruned by the gap test

    def tol(v):
        return mip_gap * max(1.0, abs(v))

    def evaluate(lo, hi):
        sol = solve_lp(prob, lo, hi)
        if sol.status == "Unbounded":
            raise NumericalFailure("LP relaxation unbounded; MIP objective has no lower bound")
        return sol

    root = evaluate(lo0, hi0)
    nodes += 1
    if root.status == "Infeasible":
        return MipResult("Infeasible", np.full(prob.num_vars, np.nan), math.inf, math.inf, nodes)
    pending = [(root, lo0, hi0)]

    while True:
        for sol, lo, hi in pending:
            if sol.status != "Optimal":
                continue
            if sol.objective_value >= incumbent - tol(incumbent):
                floor = min(floor, sol.objective_value)
                continue
            xb = sol.x[binaries]
            frac = np.abs(xb - np.round(xb))
            if binaries.size == 0 or frac.max() <= INT_TOL:
                cand = _polish(prob, sol.x, binaries, lo, hi)
                if cand is not None and prob.c @ cand < incumbent:
                    incumbent_x = cand
                    incumbent = float(prob.c @ cand)
                continue
            # most fractional: distance to 0.5 smallest, first index on ties
            k = int(np.argmin(np.abs(xb - 0.5)))
            j = int(binaries[k])
            for val in (0.0, 1.0):
                clo, chi = lo.copy(), hi.copy()
                clo[j] = chi[j] = val
                heapq.heappush(heap, (sol.objective_value, counter, clo, chi))
                counter += 1
        pending = []

        # discard nodes that can no longer beat the incumbent
        while heap and heap[0][0] >= incumbent - tol(incumbent):
            floor = min(floor, heapq.heappop(heap)[0])
        if not heap:
            break
        if node_limit is not None and nodes >= node_limit:
            bound = min(heap[0][0], incumbent)
            status = "NodeLimit"
            if incumbent_x is None:
                return MipResult(status, np.full(prob.num_vars, np.nan), math.inf, bound, nodes)
            return MipResult(status, incumbent_x, incumbent, bound, nodes)
        _, _, lo, hi = heapq.heappop(heap)
        sol = evaluate(lo, hi)
        nodes += 1
        pending.append((sol, lo, hi))

    if incumbent_x is None:
        return MipResult("Infeasible", np.full(prob.num_vars, np.nan), math.inf, math.inf, nodes)
    return MipResult("Optimal", incumbent_x, incumbent, min(incumbent, floor), nodes)


def _polish(prob: LpProblem, x: np.ndarray, binaries: np.ndarray, lo, hi):
    """Round the binaries exactly and re-optimise the continuous part."""
    if binaries.size == 0:
        return x
    rounded = x.copy()
    rounded[binaries] = np.round(x[binaries])
    if prob.max_violation(rounded) <= 1e-9:
        return rounded
    lo = lo.copy()
    hi = hi.copy()
    r = np.round(x[binaries])
    lo[binaries] = r
    hi[binaries] = r
    sol = solve_lp(prob, lo, hi)
    if sol.status != "Optimal":
        return None
    out = sol.x.copy()
    out[binaries] = r
    return out
