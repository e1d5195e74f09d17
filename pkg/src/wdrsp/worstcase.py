"""Worst-case discrete distributions for a fixed path and threshold.

Each of the N samples is moved to a new point; the average transport cost
(in the ground norm) may not exceed the radius, and with a support box the
moved points must stay in the box. The objective is the average excess
``[p.xi - t]^+`` of the moved points. Only path coordinates are ever raised:
moving anything else spends budget without changing the path time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetNegative, InfeasibleModel, UnsupportedNorm
from .graph import PathVector
from .samples import AmbiguitySpec, SampleSet
from .solver import LE, LpBuilder, solve_lp, solve_mip

TRANSPORT_TOL = 1e-9
IDENTITY_TOL = 1e-6
SPLIT_TOL = 1e-12
# N-point value this far below the robust value triggers the split construction
SPLIT_TRIGGER = 1e-9


@dataclass(frozen=True)
class WorstCaseDistribution:
    """Moved sample points; equal weights unless some samples were split."""

    points: np.ndarray
    transport_cost: float
    norm_p: float = 1.0
    weights: np.ndarray | None = None
    origin: np.ndarray | None = None  # sample each atom was moved from

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        k = pts.shape[0]
        w = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, dtype=float)
        o = np.arange(k) if self.origin is None else np.asarray(self.origin, dtype=int)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "origin", o)

    @property
    def num_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    @property
    def weight(self):
        """Common atom weight, or the weight vector when a sample was split."""
        return float(self.weights[0]) if self.is_uniform else self.weights

    def expected_excess(self, path: PathVector, t: float) -> float:
        return float(self.weights @ np.maximum(self.points @ path.selected - t, 0.0))


def transport_cost(points: np.ndarray, samples: SampleSet, norm_p: float,
                   weights=None, origin=None) -> float:
    """Weighted ground-norm distance between atoms and the samples they came from."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    src = samples.data if origin is None else samples.data[np.asarray(origin)]
    dist = np.linalg.norm(pts - src, ord=norm_p, axis=1)
    if weights is None:
        return float(dist.mean())
    return float(np.asarray(weights) @ dist)


def _package(points, samples, spec, path, t, weights=None, origin=None):
    cost = transport_cost(points, samples, spec.norm_p, weights, origin)
    wc = WorstCaseDistribution(points, cost, spec.norm_p, weights, origin)
    return wc.expected_excess(path, t), wc


def _unit_direction(path: PathVector, norm_p: float) -> np.ndarray:
    """Unit ground-norm vector that raises the path time the fastest."""
    sel = path.selected
    arcs = np.flatnonzero(sel)
    d = np.zeros_like(sel)
    if arcs.size == 0:
        return d
    if norm_p == 1.0:
        d[arcs[0]] = 1.0
    elif norm_p == math.inf:
        d[arcs] = 1.0
    else:
        d[arcs] = 1.0 / math.sqrt(arcs.size)
    return d


def _fill(row: np.ndarray, arcs: np.ndarray, head: np.ndarray, amount: float) -> float:
    """Raise path arcs of ``row`` in arc order by ``amount`` in total (l1). Returns spend."""
    spent = 0.0
    for e, room in zip(arcs, head):
        if spent >= amount:
            break
        step = min(room, amount - spent)
        row[e] += step
        spent += step
    return spent


def sup_over_B(path: PathVector, t: float, samples: SampleSet, spec: AmbiguitySpec,
               alpha=None, method: str = "auto", backend: str = "simplex"):
    """Largest average excess over all budget-feasible moves of the N samples.

    Returns ``(value, WorstCaseDistribution)``. ``alpha`` is accepted for a
    uniform call signature and ignored. ``method`` picks ``"greedy"`` (l1
    ground norm, box only), ``"milp"`` (l1 or linf with a box) or
    ``"auto"``. Without a box the answer is closed form for every norm.
    """
    if spec.radius < 0:
        raise BudgetNegative("transport budget must be nonnegative")
    t = float(t)
    data = samples.data
    N = samples.N
    budget = N * spec.radius
    r = data @ path.selected - t
    points = np.array(data, dtype=float)

    if budget == 0.0 or len(path) == 0:
        return _package(points, samples, spec, path, t)

    if spec.support is None:
        # every unit of budget buys the same lift; spend it all on the top sample
        i = int(np.argmax(r))
        points[i] += budget * _unit_direction(path, spec.norm_p)
        return _package(points, samples, spec, path, t)

    spec.check_samples(samples)
    if spec.norm_p == 2.0:
        raise UnsupportedNorm("box-constrained worst case is offered for the l1 and linf ground norms")
    if method == "auto":
        method = "greedy" if spec.norm_p == 1.0 else "milp"
    if method == "greedy":
        if spec.norm_p != 1.0:
            raise UnsupportedNorm("greedy allocation is exact only for the l1 ground norm")
        return _greedy_l1(path, t, samples, spec, r, backend)
    if method == "milp":
        return _milp(path, t, samples, spec, r, backend)
    raise ValueError(f"unknown method {method!r}")


def _greedy_l1(path, t, samples, spec, r, backend):
    """l1 ground norm inside a box.

    Budget on a sample already at or above ``t`` pays off one for one, so
    those samples are filled first (descending excess, lowest index on ties).
    A sample below ``t`` only pays once it crosses ``t``; choosing among them
    is a knapsack, so a genuine choice is handed to the exact 0-1 program.
    """
    data = samples.data
    N = samples.N
    arcs = np.flatnonzero(path.selected)
    head = spec.support.upper[arcs][None, :] - data[:, arcs]
    H = head.sum(axis=1)
    points = np.array(data, dtype=float)
    left = N * spec.radius

    order = sorted(range(N), key=lambda i: (-r[i], i))
    above = [i for i in order if r[i] >= 0.0]
    for i in above:
        if left <= 0.0:
            break
        left -= _fill(points[i], arcs, head[i], left)

    below = [i for i in order if r[i] < 0.0 and H[i] + r[i] > 0.0 and left + r[i] > 0.0]
    if not below or left <= 0.0:
        return _package(points, samples, spec, path, t)
    first = below[0]
    if len(below) == 1 or left <= H[first]:
        # any other choice crosses a larger gap with no more budget
        _fill(points[first], arcs, head[first], left)
        return _package(points, samples, spec, path, t)
    return _milp(path, t, samples, spec, r, backend, preset=points, budget=left)


def _milp(path, t, samples, spec, r, backend, preset=None, budget=None, relax=False):
    """Exact 0-1 program over per-sample moves on path arcs.

    ``z_i`` says whether sample ``i`` is counted; the excess of a counted
    sample is ``r_i + sum(delta_i)`` and moves of uncounted samples are
    forced to zero, so the optimum equals the hinge objective.

    With ``relax`` the ``z_i`` become mass fractions: a share ``z_i`` of
    sample ``i`` moves by ``delta_i / z_i`` and the rest stays put. That LP
    is the supremum over all distributions in the ball.
    """
    data = samples.data
    N = samples.N
    arcs = np.flatnonzero(path.selected)
    base = data if preset is None else preset
    rr = r if preset is None else base @ path.selected - t
    head = np.maximum(spec.support.upper[arcs][None, :] - base[:, arcs], 0.0)
    left = N * spec.radius if budget is None else budget

    b = LpBuilder()
    z = [b.var(f"z[{i}]", 0.0, 1.0, cost=-float(rr[i]), binary=not relax) for i in range(N)]
    delta = [[b.var(f"d[{i},{e}]", 0.0, float(head[i, j]), cost=-1.0) for j, e in enumerate(arcs)]
             for i in range(N)]
    for i in range(N):
        for j in range(len(arcs)):
            b.row([(delta[i][j], 1.0), (z[i], -float(head[i, j]))], LE, 0.0)
    if spec.norm_p == 1.0:
        b.row([(v, 1.0) for row in delta for v in row], LE, left)
    else:
        cost = [b.var(f"c[{i}]", 0.0, math.inf) for i in range(N)]
        for i in range(N):
            for j in range(len(arcs)):
                b.row([(delta[i][j], 1.0), (cost[i], -1.0)], LE, 0.0)
        b.row([(c, 1.0) for c in cost], LE, left)
    prob = b.build()
    if relax:
        res = solve_lp(prob, backend=backend)
    else:
        res = solve_mip(prob, backend=backend)
    if res.status != "Optimal" and res.status != "NodeLimit":
        raise InfeasibleModel(f"worst-case allocation program returned {res.status}")

    pts, wts, org = [], [], []
    for i in range(N):
        zi = min(1.0, max(0.0, float(res.x[z[i]])))
        move = np.array([max(0.0, float(res.x[delta[i][j]])) for j in range(len(arcs))])
        if not relax:
            zi = 1.0 if zi >= 0.5 else 0.0
        if zi <= SPLIT_TOL or not move.any():
            pts.append(base[i].copy()), wts.append(1.0), org.append(i)
            continue
        moved = base[i].copy()
        moved[arcs] += np.minimum(move / zi, head[i])
        if zi < 1.0 - SPLIT_TOL:
            pts.append(base[i].copy()), wts.append(1.0 - zi), org.append(i)
            pts.append(moved), wts.append(zi), org.append(i)
        else:
            pts.append(moved), wts.append(1.0), org.append(i)
    points = np.array(pts)
    weights = np.array(wts) / N
    origin = np.array(org)
    points = _trim(points, weights, origin, samples, spec)
    if len(points) == N:
        return _package(points, samples, spec, path, t)
    return _package(points, samples, spec, path, t, weights, origin)


def _trim(points, weights, origin, samples, spec):
    """Clip atoms to the box and scale moves down if round-off overspent."""
    box = spec.support
    points = np.minimum(np.maximum(points, box.lower), box.upper)
    spent = transport_cost(points, samples, spec.norm_p, weights, origin)
    if spent > spec.radius > 0:
        src = samples.data[origin]
        points = src + (points - src) * (spec.radius / spent)
    return points


def worst_case_distribution(solution, samples: SampleSet, spec: AmbiguitySpec,
                            alpha=None, backend: str = "simplex") -> WorstCaseDistribution:
    """Worst-case distribution at a solved path and its reported threshold.

    The N-point allocation is returned when it reaches the robust value.
    Inside a box it can fall short, because a sample below the threshold
    gains nothing until it crosses it; then part of one sample's mass has
    to move while the rest stays, and the distribution carries an extra
    atom with unequal weights. ``alpha`` is only needed to detect that case.
    """
    value, wc = sup_over_B(solution.path, solution.t_star, samples, spec, alpha, backend=backend)
    if spec.support is None or alpha is None:
        return wc
    if abs(solution.t_star + value / alpha - solution.objective) <= SPLIT_TRIGGER:
        return wc
    r = samples.data @ solution.path.selected - solution.t_star
    _, mixed = _milp(solution.path, solution.t_star, samples, spec, r, backend, relax=True)
    return mixed


@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "residual": c.residual, "detail": c.detail}
                for c in self.checks
            ],
        }


def verify_worst_case(wc: WorstCaseDistribution, solution, samples: SampleSet,
                      spec: AmbiguitySpec, alpha: float) -> VerificationReport:
    """Recompute the certificate properties of ``wc`` from scratch."""
    rep = VerificationReport()
    pts = np.asarray(wc.points, dtype=float)
    w = np.asarray(wc.weights, dtype=float)
    org = np.asarray(wc.origin, dtype=int)
    mass = np.bincount(org, weights=w, minlength=samples.N)
    mass_err = float(np.max(np.abs(mass - 1.0 / samples.N)))
    rep.checks.append(Check("sample_mass", mass_err <= 1e-12, mass_err,
                            f"{pts.shape[0]} atoms for {samples.N} samples"))
    cost = transport_cost(pts, samples, spec.norm_p, w, org)
    over = max(0.0, cost - spec.radius)
    rep.checks.append(Check("transport_budget", over <= TRANSPORT_TOL, over,
                            f"average transport {cost:.12g} vs radius {spec.radius:.12g}"))
    if spec.support is not None:
        box = spec.support
        out = float(max(0.0, np.max(box.lower - pts), np.max(pts - box.upper)))
        rep.checks.append(Check("inside_support", out <= 0.0, out))
    off = solution.path.selected == 0
    moved = float(np.max(np.abs(pts[:, off] - samples.data[org][:, off]), initial=0.0))
    rep.checks.append(Check("off_path_unchanged", moved == 0.0, moved))
    excess = float(w @ np.maximum(pts @ solution.path.selected - solution.t_star, 0.0))
    rebuilt = solution.t_star + excess / alpha
    gap = abs(rebuilt - solution.objective)
    rep.checks.append(Check("value_identity", gap <= IDENTITY_TOL,
                            gap, f"t + E[h]/alpha = {rebuilt:.12g}, objective {solution.objective:.12g}"))
    return rep
