"""Weighted-sum scalarization of (deterministic cost, robust mean excess)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .drsp import DrspSolution, build_drsp_nosupport, check_alpha, evaluate_path
from .errors import BadWeights, InfeasibleModel, ShapeMismatch, WdrspError
from .graph import Network, extract_path
from .samples import AmbiguitySpec, SampleSet
from .solver import solve_mip


@dataclass(frozen=True)
class BiCriteriaSpec:
    cost: np.ndarray
    weight_pairs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        cost = np.array(self.cost, dtype=float)
        if cost.ndim != 1 or not np.all(np.isfinite(cost)):
            raise BadWeights("arc cost must be a finite vector")
        pairs = []
        for pair in self.weight_pairs:
            if len(pair) != 2:
                raise BadWeights(f"weight pair {pair!r} must have two entries")
            w1, w2 = float(pair[0]), float(pair[1])
            if not (math.isfinite(w1) and math.isfinite(w2)) or w1 < 0 or w2 < 0:
                raise BadWeights(f"weights must be finite and nonnegative, got {pair!r}")
            if w1 + w2 == 0:
                raise BadWeights("a weight pair may not be all zero")
            pairs.append((w1, w2))
        if not pairs:
            raise BadWeights("no weight pairs given")
        cost.flags.writeable = False
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "weight_pairs", tuple(pairs))


@dataclass
class BiCriteriaResult:
    weights: tuple[float, float]
    solution: DrspSolution
    cost_value: float

    @property
    def wmett(self) -> float:
        return self.solution.objective

    @property
    def scalarized(self) -> float:
        w1, w2 = self.weights
        return w1 * self.cost_value + w2 * self.wmett


def solve_bicriteria(net: Network, samples: SampleSet, spec: AmbiguitySpec, alpha: float,
                     bspec: BiCriteriaSpec, backend: str = "simplex",
                     node_limit: int | None = 100_000) -> list[BiCriteriaResult]:
    """One 0-1 solve per weight pair of ``w1 * c.p + w2 * robust objective``.

    Only the ball over all of R^n is handled; a support box is refused.
    """
    alpha = check_alpha(alpha)
    if spec.support is not None:
        raise WdrspError("bi-criteria scalarization is only offered without a support box")
    if bspec.cost.shape[0] != net.n:
        raise ShapeMismatch(f"cost vector has {bspec.cost.shape[0]} entries, network {net.n} arcs")
    model = build_drsp_nosupport(net, samples, spec, alpha)
    out = []
    for w1, w2 in bspec.weight_pairs:
        c = w2 * model.lp.c
        c[model.p] += w1 * bspec.cost
        res = solve_mip(replace(model.lp, c=c), node_limit=node_limit, backend=backend)
        if res.status == "Infeasible":
            raise InfeasibleModel("no feasible o-d path")
        path = extract_path(net, res.x[model.p])
        fp = evaluate_path(path, samples, spec, alpha)
        sol = DrspSolution(path, fp.t_star, fp.value, fp.lam, fp.s, res.objective_value,
                           res.nodes_explored, res.best_bound, {"status": res.status})
        out.append(BiCriteriaResult((w1, w2), sol, float(bspec.cost @ path.selected)))
    return out
