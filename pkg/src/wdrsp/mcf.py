"""Min-cost flow with ambiguous arc costs under the linf transport metric.

With an linf ground metric and no support restriction the worst-case
expected cost of a flow ``x >= 0`` is ``mean_cost . x + radius * sum(x)``,
so the robust problem is a nominal min-cost flow with every arc cost
raised by the radius. The nominal problem is solved by successive
shortest paths with node potentials.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadValue, DanglingArc, InfeasibleFlow, InfeasibleModel, SelfLoop, ShapeMismatch
from .graph import Network, flow_constraints
from .samples import SampleSet
from .solver import EQ, LpBuilder, solve_lp

CAP_TOL = 1e-12


@dataclass(frozen=True)
class FlowNetwork:
    net: Network
    capacities: np.ndarray
    supplies: np.ndarray
    cost_samples: SampleSet

    def __post_init__(self):
        net = self.net
        for e, (u, v) in enumerate(net.arcs):
            if not (0 <= u < net.m and 0 <= v < net.m):
                raise DanglingArc(f"arc {e} ({u}, {v}) references a missing vertex")
            if u == v:
                raise SelfLoop(f"arc {e} is a self-loop")
        u = np.array(self.capacities, dtype=float)
        b = np.array(self.supplies, dtype=float)
        if u.shape != (net.n,):
            raise ShapeMismatch(f"{u.shape[0]} capacities for {net.n} arcs")
        if b.shape != (net.m,):
            raise ShapeMismatch(f"{b.shape[0]} supplies for {net.m} vertices")
        if self.cost_samples.n != net.n:
            raise ShapeMismatch(f"cost samples over {self.cost_samples.n} arcs, network {net.n}")
        if not np.all(np.isfinite(u)) or np.any(u < 0):
            raise BadValue("capacities must be finite and nonnegative")
        if not np.all(np.isfinite(b)):
            raise BadValue("supplies must be finite")
        if abs(b.sum()) > 1e-9 * max(1.0, np.abs(b).sum()):
            raise BadValue(f"supplies sum to {b.sum()!r}, not zero")
        object.__setattr__(self, "capacities", u)
        object.__setattr__(self, "supplies", b)


@dataclass
class FlowSolution:
    x: np.ndarray
    objective: float


def adjusted_costs(cost_samples: SampleSet, epsilon: float) -> np.ndarray:
    """Per-arc sample mean plus the radius."""
    if not epsilon >= 0:
        raise BadValue(f"radius must be nonnegative, got {epsilon}")
    return cost_samples.data.mean(axis=0) + float(epsilon)


def robust_flow_cost(fnet: FlowNetwork, x: np.ndarray, epsilon: float) -> float:
    """Mean sample cost of ``x`` plus ``epsilon * ||x||_1``."""
    x = np.asarray(x, dtype=float)
    return float(fnet.cost_samples.data.mean(axis=0) @ x + epsilon * np.abs(x).sum())


def min_cost_flow(net: Network, cost: np.ndarray, capacities: np.ndarray,
                  supplies: np.ndarray) -> np.ndarray:
    """Successive shortest paths from a super source to a super sink.

    Negative-cost arcs are saturated up front so the residual graph starts
    free of negative cycles; Bellman-Ford then supplies the first potentials
    and Dijkstra with reduced costs does the rest.
    """
    m, n = net.m, net.n
    cost = np.asarray(cost, dtype=float)
    cap = np.asarray(capacities, dtype=float)
    x = np.zeros(n)
    excess = np.array(supplies, dtype=float)
    for e, (u, v) in enumerate(net.arcs):
        if cost[e] < 0 and cap[e] > 0:
            x[e] = cap[e]
            excess[u] -= cap[e]
            excess[v] += cap[e]

    S, T = m, m + 1
    # residual arcs: [head, residual capacity, cost, partner index]
    graph: list[list[list]] = [[] for _ in range(m + 2)]
    ref = []

    def add(u, v, c, w, back=0.0):
        graph[u].append([v, c, w, len(graph[v])])
        graph[v].append([u, back, -w, len(graph[u]) - 1])
        return u, len(graph[u]) - 1

    for e, (u, v) in enumerate(net.arcs):
        ref.append(add(u, v, cap[e] - x[e], cost[e], back=x[e]))
    need = 0.0
    for i in range(m):
        if excess[i] > 0:
            add(S, i, excess[i], 0.0)
            need += excess[i]
        elif excess[i] < 0:
            add(i, T, -excess[i], 0.0)

    V = m + 2
    pot = np.full(V, math.inf)
    pot[S] = 0.0
    for _ in range(V - 1):
        changed = False
        for u in range(V):
            if pot[u] == math.inf:
                continue
            for v, c, w, _ in graph[u]:
                if c > CAP_TOL and pot[u] + w < pot[v] - 1e-15:
                    pot[v] = pot[u] + w
                    changed = True
        if not changed:
            break
    pot[~np.isfinite(pot)] = 0.0

    shipped = 0.0
    while shipped < need - CAP_TOL * max(1.0, need):
        dist = np.full(V, math.inf)
        prev: list[tuple[int, int] | None] = [None] * V
        dist[S] = 0.0
        done = np.zeros(V, dtype=bool)
        heap = [(0.0, S)]
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for k, (v, c, w, _) in enumerate(graph[u]):
                # settled nodes stay put, so round-off in reduced costs cannot loop the tree
                if c <= CAP_TOL or done[v]:
                    continue
                nd = d + w + pot[u] - pot[v]
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    prev[v] = (u, k)
                    heapq.heappush(heap, (nd, v))
        if dist[T] == math.inf:
            raise InfeasibleFlow(f"only {shipped:.12g} of {need:.12g} units can be routed")
        reach = np.isfinite(dist)
        pot[reach] += dist[reach]
        push = need - shipped
        v = T
        while v != S:
            u, k = prev[v]
            push = min(push, graph[u][k][1])
            v = u
        v = T
        while v != S:
            u, k = prev[v]
            arc = graph[u][k]
            arc[1] -= push
            graph[v][arc[3]][1] += push
            v = u
        shipped += push

    for e, (u, k) in enumerate(ref):
        x[e] = cap[e] - graph[u][k][1]
    return np.clip(x, 0.0, cap)


def solve_drmcf(fnet: FlowNetwork, epsilon: float) -> FlowSolution:
    cost = adjusted_costs(fnet.cost_samples, epsilon)
    x = min_cost_flow(fnet.net, cost, fnet.capacities, fnet.supplies)
    return FlowSolution(x, float(cost @ x))


def drmcf_lp(fnet: FlowNetwork, epsilon: float, backend: str = "simplex") -> FlowSolution:
    """Same problem written as an LP for the general solver."""
    cost = adjusted_costs(fnet.cost_samples, epsilon)
    b = LpBuilder()
    xs = [b.var(f"x[{fnet.net.arc_label(e)}]", 0.0, float(fnet.capacities[e]), cost=float(cost[e]))
          for e in range(fnet.net.n)]
    A, _ = flow_constraints(fnet.net)
    for v in range(fnet.net.m):
        b.row({xs[e]: A[v, e] for e in np.flatnonzero(A[v])}, EQ, float(fnet.supplies[v]))
    sol = solve_lp(b.build(), backend=backend)
    if sol.status == "Infeasible":
        raise InfeasibleFlow("supplies cannot be routed under the capacities")
    if sol.status != "Optimal":
        raise InfeasibleModel(f"flow LP returned {sol.status}")
    x = sol.x[xs]
    return FlowSolution(x, float(cost @ x))
