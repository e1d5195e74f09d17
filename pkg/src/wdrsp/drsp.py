"""SAA and Wasserstein-robust shortest-path models as mixed 0-1 LPs.

Variables per model: path indicators ``p`` (binary, one per arc), the
threshold ``t`` (free), per-sample excess ``s_i >= 0`` and the dual
multiplier ``lam >= 0`` of the transport budget. The support-box model adds
per-sample box multipliers ``gamma_i, eta_i >= 0`` (one per arc each).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlphaOutOfRange, InfeasibleModel, NumericalFailure, UnsupportedNorm, WdrspError
from .graph import Network, PathVector, extract_path, flow_constraints, validate_network
from .samples import AmbiguitySpec, SampleSet, path_times
from .solver import EQ, GE, LE, LpBuilder, LpProblem, solve_lp, solve_mip


def check_alpha(alpha: float) -> float:
    if not (0.0 < alpha <= 1.0):
        raise AlphaOutOfRange(f"risk level alpha must lie in (0, 1], got {alpha}")
    return float(alpha)


def cvar_empirical(values, alpha: float) -> tuple[float, float]:
    """Mean excess of equally weighted ``values`` at level ``alpha``.

    Returns ``(value, t_star)`` where ``t_star`` is the smallest minimiser of
    ``t + mean([v - t]^+) / alpha``; for ``alpha == 1`` the minimisers form a
    half-line and the smallest sample is reported.
    """
    alpha = check_alpha(alpha)
    v = np.sort(np.asarray(values, dtype=float).ravel())
    K = v.size
    if K == 0:
        raise WdrspError("cvar of an empty sample")
    # smallest k with K - k <= alpha*K, guarded against round-off in alpha*K
    k = max(1, math.ceil(K - alpha * K - 1e-9 * K))
    t_star = float(v[k - 1])
    value = t_star + float(np.maximum(v - t_star, 0.0).sum()) / (alpha * K)
    return value, t_star


def path_norm(path: PathVector, q: float) -> float:
    """``||p||_q`` of a 0/1 path vector: arc count to the power 1/q."""
    k = len(path)
    if q == math.inf:
        return 1.0 if k else 0.0
    return float(k) ** (1.0 / q)


@dataclass
class DrspModel:
    net: Network
    samples: SampleSet
    spec: AmbiguitySpec
    alpha: float
    kind: str  # "saa" | "nosupport" | "support"
    lp: LpProblem
    p: np.ndarray
    t: int
    s: np.ndarray
    lam: int
    gamma: np.ndarray | None = None
    eta: np.ndarray | None = None
    aux: np.ndarray | None = None  # absolute-value splits for q = 1 with support

    @property
    def num_core_vars(self) -> int:
        core = len(self.p) + 1 + len(self.s) + 1
        if self.gamma is not None:
            core += self.gamma.size + self.eta.size
        return core


@dataclass
class DrspSolution:
    path: PathVector
    t_star: float
    objective: float
    lambda_star: float
    per_sample_s: np.ndarray
    mip_objective: float = math.nan
    nodes_explored: int = 0
    best_bound: float = math.nan
    extra: dict = field(default_factory=dict)

    def identity_residual(self, alpha: float, radius: float) -> float:
        rebuilt = self.t_star + (float(np.mean(self.per_sample_s)) + self.lambda_star * radius) / alpha
        return abs(rebuilt - self.objective)


def _base(net: Network, samples: SampleSet, alpha: float, radius: float, p_bounds=None):
    validate_network(net)
    if samples.n != net.n:
        raise WdrspError(f"samples have {samples.n} columns, network has {net.n} arcs")
    N = samples.N
    b = LpBuilder()
    if p_bounds is None:
        p = np.array([b.var(f"p[{net.arc_label(e)}]", 0.0, 1.0, binary=True) for e in range(net.n)])
    else:
        p = np.array([b.var(f"p[{net.arc_label(e)}]", v, v) for e, v in enumerate(p_bounds)])
    t = b.var("t", -math.inf, math.inf, cost=1.0)
    s = np.array([b.var(f"s[{i}]", 0.0, math.inf, cost=1.0 / (alpha * N)) for i in range(N)])
    lam = b.var("lambda", 0.0, math.inf, cost=radius / alpha)
    A, rhs = flow_constraints(net)
    for v in range(net.m):
        b.row({int(p[e]): A[v, e] for e in np.flatnonzero(A[v])}, EQ, rhs[v])
    return b, p, t, s, lam


def _excess_rows(b: LpBuilder, samples: SampleSet, p, t, s):
    # xi_i . p - t - s_i <= 0
    for i, row in enumerate(samples.data):
        coeffs = [(int(p[e]), float(row[e])) for e in range(len(p)) if row[e] != 0.0]
        coeffs += [(t, -1.0), (int(s[i]), -1.0)]
        b.row(coeffs, LE, 0.0)


def _norm_rows_nosupport(b: LpBuilder, q: float, p, lam, fixed_norm: float | None = None):
    if q == math.inf:
        for e in range(len(p)):
            b.row([(int(p[e]), 1.0), (lam, -1.0)], LE, 0.0)
        # every o-d path uses at least one arc, so ||p||_inf = 1
        b.row([(lam, 1.0)], GE, 1.0)
    elif q == 1.0:
        b.row([(int(p[e]), 1.0) for e in range(len(p))] + [(lam, -1.0)], LE, 0.0)
    else:
        if fixed_norm is None:
            raise UnsupportedNorm(
                "the l2 ground norm needs a mixed 0-1 SOCP; only fixed-path evaluation is offered"
            )
        b.row([(lam, 1.0)], GE, fixed_norm)


def build_saa(net: Network, samples: SampleSet, alpha: float) -> DrspModel:
    """``min t + sum_i s_i / (alpha N)`` with ``s_i >= xi_i.p - t`` over o-d paths."""
    alpha = check_alpha(alpha)
    spec = AmbiguitySpec(0.0, 1.0)
    b, p, t, s, lam = _base(net, samples, alpha, 0.0)
    _excess_rows(b, samples, p, t, s)
    return DrspModel(net, samples, spec, alpha, "saa", b.build(), p, t, s, lam)


def build_drsp_nosupport(net: Network, samples: SampleSet, spec: AmbiguitySpec,
                         alpha: float) -> DrspModel:
    """Robust model over the Wasserstein ball on all of R^n."""
    alpha = check_alpha(alpha)
    if spec.support is not None:
        raise WdrspError("spec carries a support box; use build_drsp_support")
    b, p, t, s, lam = _base(net, samples, alpha, spec.radius)
    _excess_rows(b, samples, p, t, s)
    _norm_rows_nosupport(b, spec.dual_q, p, lam)
    return DrspModel(net, samples, spec, alpha, "nosupport", b.build(), p, t, s, lam)


def _support_rows(b: LpBuilder, samples: SampleSet, spec: AmbiguitySpec, p, t, s, lam):
    box = spec.support
    N, n = samples.data.shape
    a, bb = box.lower, box.upper
    q = spec.dual_q
    gamma = np.zeros((N, n), dtype=int)
    eta = np.zeros((N, n), dtype=int)
    for i in range(N):
        for e in range(n):
            gamma[i, e] = b.var(f"gamma[{i},{e}]")
            eta[i, e] = b.var(f"eta[{i},{e}]")
    aux = None
    if q == 1.0:
        aux = np.zeros((N, n, 2), dtype=int)
        for i in range(N):
            for e in range(n):
                aux[i, e, 0] = b.var(f"wplus[{i},{e}]")
                aux[i, e, 1] = b.var(f"wminus[{i},{e}]")
    elif q != math.inf:
        raise UnsupportedNorm("with a support box only the l1 and linf ground norms are linear")

    for i, xi in enumerate(samples.data):
        coeffs = [(int(p[e]), float(xi[e])) for e in range(n) if xi[e] != 0.0]
        coeffs += [(int(gamma[i, e]), float(xi[e] - a[e])) for e in range(n)]
        coeffs += [(int(eta[i, e]), float(bb[e] - xi[e])) for e in range(n)]
        coeffs += [(t, -1.0), (int(s[i]), -1.0)]
        b.row(coeffs, LE, 0.0)
        if q == math.inf:
            for e in range(n):
                g, h, pe = int(gamma[i, e]), int(eta[i, e]), int(p[e])
                b.row([(pe, 1.0), (g, 1.0), (h, -1.0), (lam, -1.0)], LE, 0.0)
                b.row([(pe, -1.0), (g, -1.0), (h, 1.0), (lam, -1.0)], LE, 0.0)
        else:
            for e in range(n):
                b.row([(int(aux[i, e, 0]), 1.0), (int(aux[i, e, 1]), -1.0), (int(p[e]), -1.0),
                       (int(gamma[i, e]), -1.0), (int(eta[i, e]), 1.0)], EQ, 0.0)
            b.row([(int(aux[i, e, k]), 1.0) for e in range(n) for k in (0, 1)] + [(lam, -1.0)],
                  LE, 0.0)
    return gamma, eta, aux


def build_drsp_support(net: Network, samples: SampleSet, spec: AmbiguitySpec,
                       alpha: float) -> DrspModel:
    """Robust model over the Wasserstein ball restricted to the support box."""
    alpha = check_alpha(alpha)
    if spec.support is None:
        raise WdrspError("spec has no support box; use build_drsp_nosupport")
    if spec.dual_q not in (1.0, math.inf):
        raise UnsupportedNorm("the l2 ground norm with a support box needs a mixed 0-1 SOCP")
    spec.check_samples(samples)
    b, p, t, s, lam = _base(net, samples, alpha, spec.radius)
    gamma, eta, aux = _support_rows(b, samples, spec, p, t, s, lam)
    return DrspModel(net, samples, spec, alpha, "support", b.build(), p, t, s, lam, gamma, eta, aux)


def build_model(net: Network, samples: SampleSet, spec: AmbiguitySpec, alpha: float) -> DrspModel:
    if spec.support is not None:
        return build_drsp_support(net, samples, spec, alpha)
    return build_drsp_nosupport(net, samples, spec, alpha)


@dataclass
class FixedPathValue:
    value: float
    t_star: float
    lam: float
    s: np.ndarray


def evaluate_path(path: PathVector, samples: SampleSet, spec: AmbiguitySpec, alpha: float,
                  backend: str = "simplex") -> FixedPathValue:
    """Worst-case mean excess of a fixed path, with the dual certificate."""
    alpha = check_alpha(alpha)
    times = path_times(samples, path)
    if spec.support is None:
        cvar, t_star = cvar_empirical(times, alpha)
        lam = path_norm(path, spec.dual_q)
        return FixedPathValue(cvar + spec.radius * lam / alpha, t_star, lam,
                              np.maximum(times - t_star, 0.0))
    return _support_fixed_path(path, samples, spec, alpha, times, backend)


def _fixed_path_builder(path: PathVector, samples: SampleSet, spec: AmbiguitySpec, alpha: float):
    N, n = samples.data.shape
    b = LpBuilder()
    p = np.array([b.var(f"p[{e}]", v, v) for e, v in enumerate(path.selected)])
    t = b.var("t", -math.inf, math.inf, cost=1.0)
    s = np.array([b.var(f"s[{i}]", 0.0, math.inf, cost=1.0 / (alpha * N)) for i in range(N)])
    lam = b.var("lambda", 0.0, math.inf, cost=spec.radius / alpha)
    return b, p, t, s, lam


def box_lift_lines(path: PathVector, samples: SampleSet, spec: AmbiguitySpec):
    """Per-sample worst-case lift of the path time inside the box.

    For transport price ``lam`` the most a sample's path time can be raised,
    net of transport cost, is ``max(0, max_k c_k - h_k * lam)``. Returns
    ``(intercepts, slopes)`` of shape ``(N, K)``; column 0 is the zero line.
    Beyond ``lam = ||p||_q`` every lift is zero.
    """
    box = spec.support
    sel = path.selected.astype(bool)
    head = (box.upper[sel] - samples.data[:, sel])  # (N, k) headroom on path arcs
    N, k = head.shape
    if spec.dual_q == math.inf:
        # l1 transport: one unit of budget lifts the path time by one unit
        tot = head.sum(axis=1)
        c = np.column_stack([np.zeros(N), tot])
        h = np.column_stack([np.zeros(N), tot])
    elif spec.dual_q == 1.0:
        # linf transport: shift every path arc by delta, capped by its headroom
        hs = np.sort(head, axis=1)
        csum = np.cumsum(hs, axis=1)
        below = np.concatenate([np.zeros((N, 1)), csum[:, :-1]], axis=1)
        gain = below + hs * (k - np.arange(k))
        c = np.column_stack([np.zeros(N), gain])
        h = np.column_stack([np.zeros(N), hs])
    else:
        raise UnsupportedNorm("box lift is only piecewise linear for the l1 and linf ground norms")
    return c, h


# above this many lift lines the pairwise crossing scan gives way to cutting planes
SCAN_MAX_LINES = 250
PLANE_MAX_ITER = 10_000


def _support_exact(path: PathVector, samples: SampleSet, spec: AmbiguitySpec, alpha: float):
    c, h = box_lift_lines(path, samples, spec)
    if c.size > SCAN_MAX_LINES:
        return _support_planes(path, samples, spec, alpha, c, h)
    return _support_scan(path, samples, spec, alpha, c, h)


def _certificate(times, c, h, lam, spec, alpha) -> FixedPathValue:
    N = times.size
    V = times + np.max(c - h * lam, axis=1)
    k = max(1, math.ceil(N - alpha * N - 1e-9 * N))
    t_star = float(np.sort(V)[k - 1])
    s = np.maximum(V - t_star, 0.0)
    value = t_star + (float(s.mean()) + lam * spec.radius) / alpha
    return FixedPathValue(value, t_star, float(lam), s)


def _support_planes(path, samples, spec, alpha, c, h) -> FixedPathValue:
    """Exact minimiser of the convex piecewise-linear objective by cutting planes.

    The objective is a maximum of lines in ``lam`` (mean-excess dual weights
    times the active lift lines), so each evaluation also yields a supporting
    line. Intersecting the supports at both ends of the bracket either lands
    on the function, which proves optimality, or exposes a new piece. A
    second pass walks right to the largest optimal ``lam``.
    """
    times = path_times(samples, path)
    N = samples.N
    ranks = np.arange(N)
    cap = 1.0 / (alpha * N)
    weights = np.minimum(cap, np.maximum(0.0, 1.0 - ranks * cap))

    def support(lam):
        vals = times[:, None] + c - h * lam
        j = np.argmax(vals, axis=1)
        V = vals[np.arange(N), j]
        order = np.argsort(-V, kind="stable")
        q = np.empty(N)
        q[order] = weights
        slope = float(-(q @ h[np.arange(N), j])) + spec.radius / alpha
        value = float(q @ V) + lam * spec.radius / alpha
        return value, slope

    def tol(v):
        return 1e-12 * (1.0 + abs(v))

    lo, hi = 0.0, path_norm(path, spec.dual_q)
    g_lo, s_lo = support(lo)
    g_hi, s_hi = support(hi)
    if s_lo >= 0.0:
        best, g_best = lo, g_lo
    elif s_hi <= 0.0:
        best, g_best = hi, g_hi
    else:
        for _ in range(PLANE_MAX_ITER):
            mid = ((g_hi - s_hi * hi) - (g_lo - s_lo * lo)) / (s_lo - s_hi)
            mid = min(max(mid, lo), hi)
            model = g_lo + s_lo * (mid - lo)
            g_mid, s_mid = support(mid)
            if g_mid <= model + tol(g_mid) or mid in (lo, hi):
                best, g_best = mid, g_mid
                break
            if s_mid > 0.0:
                hi, g_hi, s_hi = mid, g_mid, s_mid
            elif s_mid < 0.0:
                lo, g_lo, s_lo = mid, g_mid, s_mid
            else:
                best, g_best = mid, g_mid
                break
        else:
            raise NumericalFailure("cutting-plane search did not settle")

    # largest lam still on the optimal level
    right = path_norm(path, spec.dual_q)
    g_r, s_r = support(right)
    for _ in range(PLANE_MAX_ITER):
        if g_r <= g_best + tol(g_best) or right <= best:
            best = max(best, right)
            break
        cut = right - (g_r - g_best) / s_r
        right = max(cut, best)
        g_r, s_r = support(right)
    else:
        raise NumericalFailure("cutting-plane search did not settle")
    return _certificate(times, c, h, best, spec, alpha)


def _support_scan(path: PathVector, samples: SampleSet, spec: AmbiguitySpec, alpha: float, c, h):
    """Minimise ``CVaR(v(lam)) + lam * radius / alpha`` over ``lam`` exactly.

    ``v_i(lam)`` is the sample's path time plus its box lift; the objective
    is convex piecewise linear in ``lam`` and its kinks sit where two lift
    lines cross, so scanning those crossings is exact. Among optimal ``lam``
    the largest is kept, which yields the smallest optimal threshold.
    """
    times = path_times(samples, path)
    N = samples.N
    lam_max = path_norm(path, spec.dual_q)
    icpt = (times[:, None] + c).ravel()
    slope = h.ravel()
    di = icpt[:, None] - icpt[None, :]
    dh = slope[:, None] - slope[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = di / dh
    cand = cross[np.isfinite(cross) & (dh != 0)]
    cand = cand[(cand > 0.0) & (cand < lam_max)]
    cand = np.unique(np.concatenate([[0.0, lam_max], cand]))

    V = times[None, :] + np.max(c[None, :, :] - h[None, :, :] * cand[:, None, None], axis=2)
    Vs = np.sort(V, axis=1)
    k = max(1, math.ceil(N - alpha * N - 1e-9 * N))
    t = Vs[:, k - 1]
    g = t + (np.maximum(V - t[:, None], 0.0).sum(axis=1) + cand * spec.radius * N) / (alpha * N)
    gmin = g.min()
    best = np.flatnonzero(g <= gmin + 1e-12 * (1.0 + abs(gmin)))
    return _certificate(times, c, h, float(cand[int(best[-1])]), spec, alpha)


def _support_fixed_path(path, samples, spec, alpha, times, backend) -> FixedPathValue:
    spec.check_samples(samples)
    exact = _support_exact(path, samples, spec, alpha)
    if backend == "exact":
        return exact
    value = fixed_path_lp(path, samples, spec, alpha, backend=backend)
    if abs(value - exact.value) > 1e-7 * (1.0 + abs(value)):
        raise NumericalFailure(
            f"box LP value {value!r} disagrees with breakpoint scan {exact.value!r}"
        )
    return FixedPathValue(value, exact.t_star, exact.lam, exact.s)


def wmett_fixed_path(path: PathVector, samples: SampleSet, spec: AmbiguitySpec,
                     alpha: float, backend: str = "simplex") -> tuple[float, float]:
    """Worst-case mean-excess travel time of ``path`` and its smallest threshold.

    Closed form without a support box (empirical CVaR plus
    ``radius * ||p||_q / alpha``, all of l1, l2, linf); the box case solves
    the dual LP with the path fixed.
    """
    r = evaluate_path(path, samples, spec, alpha, backend)
    return r.value, r.t_star


def fixed_path_lp(path: PathVector, samples: SampleSet, spec: AmbiguitySpec, alpha: float,
                  backend: str = "simplex") -> float:
    """Optimal value of the finite dual LP with ``p`` pinned to ``path``.

    Without a box the norm row is written the same way the 0-1 model writes
    it (per-arc rows for linf duals, a sum row for l1 duals); for the l2 dual
    the norm of a fixed vector is a constant bound on ``lam``.
    """
    alpha = check_alpha(alpha)
    b, p, t, s, lam = _fixed_path_builder(path, samples, spec, alpha)
    if spec.support is None:
        _excess_rows(b, samples, p, t, s)
        _norm_rows_nosupport(b, spec.dual_q, p, lam,
                             fixed_norm=float(np.linalg.norm(path.selected, spec.dual_q)))
    else:
        _support_rows(b, samples, spec, p, t, s, lam)
    sol = solve_lp(b.build(), backend=backend)
    if sol.status != "Optimal":
        raise InfeasibleModel(f"fixed-path LP returned {sol.status}")
    return sol.objective_value


def solve_drsp(model: DrspModel, backend: str = "simplex",
               node_limit: int | None = 100_000) -> DrspSolution:
    """Solve the 0-1 model and report a canonical certificate for its path.

    The path is read off the binaries (arcs that only close cycles are
    dropped) and then re-evaluated exactly, so ``objective``/``t_star``
    do not carry LP round-off from the branch-and-bound.
    """
    res = solve_mip(model.lp, node_limit=node_limit, backend=backend)
    if res.status == "Infeasible":
        raise InfeasibleModel("no feasible o-d path in the 0-1 model")
    selection = res.x[model.p]
    path = extract_path(model.net, selection)
    spec = model.spec
    # canonical certificate without another LP solve
    fp = evaluate_path(path, model.samples, spec, model.alpha, backend="exact")
    extra = {"status": res.status}
    if not np.array_equal(path.selected, np.round(selection)):
        extra["stripped_arcs"] = [int(e) for e in np.flatnonzero(np.round(selection) - path.selected)]
    return DrspSolution(path, fp.t_star, fp.value, fp.lam, fp.s, res.objective_value,
                        res.nodes_explored, res.best_bound, extra)


def solve_saa(net: Network, samples: SampleSet, alpha: float, **kw) -> DrspSolution:
    return solve_drsp(build_saa(net, samples, alpha), **kw)


def solve_robust(net: Network, samples: SampleSet, spec: AmbiguitySpec, alpha: float,
                 **kw) -> DrspSolution:
    return solve_drsp(build_model(net, samples, spec, alpha), **kw)
