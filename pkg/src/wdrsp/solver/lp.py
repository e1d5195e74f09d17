"""LP problem container and a bounded-variable revised simplex.

The simplex works on ``min c x  s.t.  A x = b, 0 <= x <= u`` after the
user problem is shifted/split into that form. Phase 1 minimises the sum of
artificials; artificials left basic at zero are pinned to ``[0, 0]`` for
phase 2, which handles redundant equality rows (flow balance has one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..errors import NumericalFailure

LE, EQ, GE = "<=", "=", ">="

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-9
DEGENERACY_STREAK = 50
REFACTOR_EVERY = 24


@dataclass(frozen=True)
class Row:
    coeffs: Mapping[int, float]
    sense: str
    rhs: float


@dataclass
class LpProblem:
    """Minimisation problem over ``V`` variables.

    Rows are sparse ``{column: coefficient}`` maps. ``binary`` flags the
    columns that the MIP stage must drive to 0/1; ``solve_lp`` ignores it.
    """

    c: np.ndarray
    rows: list[Row]
    lo: np.ndarray
    hi: np.ndarray
    binary: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        self.binary = np.asarray(self.binary, dtype=bool)
        V = self.c.shape[0]
        if not (self.lo.shape == self.hi.shape == self.binary.shape == (V,)):
            raise ValueError("bounds and binary mask must match the objective length")
        if np.any(self.lo > self.hi):
            raise ValueError("variable with lo > hi")
        for r in self.rows:
            if r.sense not in (LE, EQ, GE):
                raise ValueError(f"bad relation {r.sense!r}")
            if not math.isfinite(r.rhs):
                raise ValueError("rhs must be finite")
        self._dense = None

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    def matrix(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Dense constraint matrix, right-hand side, senses."""
        if self._dense is None:
            A = np.zeros((len(self.rows), self.num_vars))
            for i, r in enumerate(self.rows):
                for j, v in r.coeffs.items():
                    A[i, j] += v
            b = np.array([r.rhs for r in self.rows], dtype=float)
            self._dense = (A, b, [r.sense for r in self.rows])
        return self._dense

    def sparse_matrix(self) -> tuple[sparse.csr_array, np.ndarray, list[str]]:
        """Same as :meth:`matrix` in CSR form, for large external solves."""
        rows, cols, vals = [], [], []
        for i, r in enumerate(self.rows):
            for j, v in r.coeffs.items():
                rows.append(i)
                cols.append(j)
                vals.append(v)
        A = sparse.csr_array((vals, (rows, cols)), shape=(len(self.rows), self.num_vars))
        b = np.array([r.rhs for r in self.rows], dtype=float)
        return A, b, [r.sense for r in self.rows]

    def max_violation(self, x: np.ndarray) -> float:
        """Largest absolute violation of any row or bound at ``x``."""
        A, b, senses = self.matrix()
        worst = 0.0
        if len(b):
            ax = A @ x
            for i, s in enumerate(senses):
                if s == LE:
                    worst = max(worst, ax[i] - b[i])
                elif s == GE:
                    worst = max(worst, b[i] - ax[i])
                else:
                    worst = max(worst, abs(ax[i] - b[i]))
        worst = max(worst, float(np.max(self.lo - x, initial=0.0)))
        worst = max(worst, float(np.max(x - self.hi, initial=0.0)))
        return worst

    def dump(self) -> str:
        """Plain-text listing of the problem, one row per line."""
        names = self.names or [f"x{j}" for j in range(self.num_vars)]

        def term(j, v):
            return f"{v:+.12g}*{names[j]}"

        lines = ["minimize " + " ".join(term(j, v) for j, v in enumerate(self.c) if v != 0)]
        lines.append("subject to")
        for i, r in enumerate(self.rows):
            body = " ".join(term(j, v) for j, v in sorted(r.coeffs.items()) if v != 0)
            lines.append(f"  r{i}: {body} {r.sense} {r.rhs:.12g}")
        lines.append("bounds")
        for j in range(self.num_vars):
            tag = " binary" if self.binary[j] else ""
            lines.append(f"  {self.lo[j]:.12g} <= {names[j]} <= {self.hi[j]:.12g}{tag}")
        return "\n".join(lines) + "\n"


class LpBuilder:
    """Incremental construction of an :class:`LpProblem` with named columns."""

    def __init__(self):
        self._c: list[float] = []
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._bin: list[bool] = []
        self.names: list[str] = []
        self.rows: list[Row] = []

    def var(self, name: str, lo: float = 0.0, hi: float = math.inf, cost: float = 0.0,
            binary: bool = False) -> int:
        self._c.append(cost)
        self._lo.append(lo)
        self._hi.append(hi)
        self._bin.append(binary)
        self.names.append(name)
        return len(self._c) - 1

    def add_cost(self, j: int, cost: float) -> None:
        self._c[j] += cost

    def row(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]], sense: str,
            rhs: float) -> int:
        merged: dict[int, float] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, v in items:
            merged[j] = merged.get(j, 0.0) + float(v)
        self.rows.append(Row(merged, sense, float(rhs)))
        return len(self.rows) - 1

    def build(self) -> LpProblem:
        return LpProblem(np.array(self._c), list(self.rows), np.array(self._lo),
                         np.array(self._hi), np.array(self._bin), list(self.names))


@dataclass
class LpSolution:
    status: str  # "Optimal" | "Infeasible" | "Unbounded"
    x: np.ndarray
    objective_value: float
    iterations: int


class _StandardForm:
    """``min c'y, A'y = b', 0 <= y <= u`` with a map back to the user variables."""

    def __init__(self, prob: LpProblem, lo: np.ndarray, hi: np.ndarray):
        A, b, senses = prob.matrix()
        V = prob.num_vars
        m = A.shape[0]
        cols = []  # list of (orig_var, sign)
        const = np.zeros(V)
        self.recover = []  # per orig var: list of (std_col, sign)
        for j in range(V):
            l, h = lo[j], hi[j]
            if math.isfinite(l):
                const[j] = l
                self.recover.append([(len(cols), 1.0)])
                cols.append((j, 1.0, h - l))
            elif math.isfinite(h):
                const[j] = h
                self.recover.append([(len(cols), -1.0)])
                cols.append((j, -1.0, math.inf))
            else:
                self.recover.append([(len(cols), 1.0), (len(cols) + 1, -1.0)])
                cols.append((j, 1.0, math.inf))
                cols.append((j, -1.0, math.inf))
        self.const = const
        nstruct = len(cols)
        idx = np.array([c[0] for c in cols], dtype=int)
        sign = np.array([c[1] for c in cols])
        ub = [c[2] for c in cols]
        As = A[:, idx] * sign if m else np.zeros((0, nstruct))
        cs = prob.c[idx] * sign
        bs = b - (A @ const if m else np.zeros(0))

        slack_cols = []
        slack_row = []
        for i, s in enumerate(senses):
            if s == LE:
                slack_cols.append(1.0)
                slack_row.append(i)
            elif s == GE:
                slack_cols.append(-1.0)
                slack_row.append(i)
        ns = len(slack_row)
        S = np.zeros((m, ns))
        for k, (i, v) in enumerate(zip(slack_row, slack_cols)):
            S[i, k] = v
        A_full = np.hstack([As, S])
        c_full = np.concatenate([cs, np.zeros(ns)])
        u_full = np.concatenate([np.array(ub, dtype=float), np.full(ns, math.inf)])

        flip = bs < 0
        A_full[flip] *= -1.0
        bs = np.where(flip, -bs, bs)

        # initial basis: a +1 slack where available, otherwise an artificial
        basis = []
        art_rows = []
        slack_of = {i: k for k, i in enumerate(slack_row)}
        for i in range(m):
            chosen = -1
            if i in slack_of:
                k = slack_of[i]
                if A_full[i, nstruct + k] > 0:
                    chosen = nstruct + k
            if chosen < 0:
                art_rows.append(i)
            basis.append(chosen)
        na = len(art_rows)
        Art = np.zeros((m, na))
        for k, i in enumerate(art_rows):
            Art[i, k] = 1.0
            basis[i] = nstruct + ns + k
        self.A = np.hstack([A_full, Art])
        self.b = bs
        self.c = np.concatenate([c_full, np.zeros(na)])
        self.u = np.concatenate([u_full, np.zeros(na) + math.inf])
        self.n_real = nstruct + ns
        self.n_art = na
        self.basis = basis
        self.V = V

    def to_user(self, y: np.ndarray) -> np.ndarray:
        x = self.const.copy()
        for j, parts in enumerate(self.recover):
            for col, sgn in parts:
                x[j] += sgn * y[col]
        return x


class _Simplex:
    def __init__(self, sf: _StandardForm, max_iter: int):
        self.A = sf.A
        self.AT = sparse.csr_matrix(sf.A.T)
        self.col_rows = [self.AT.indices[self.AT.indptr[j]:self.AT.indptr[j + 1]]
                         for j in range(self.A.shape[1])]
        self.col_vals = [self.AT.data[self.AT.indptr[j]:self.AT.indptr[j + 1]]
                         for j in range(self.A.shape[1])]
        self.b = sf.b
        self.u = sf.u.copy()
        self.m, self.ncols = self.A.shape
        self.basis = np.array(sf.basis, dtype=int)
        self.at_upper = np.zeros(self.ncols, dtype=bool)
        self.is_basic = np.zeros(self.ncols, dtype=bool)
        self.is_basic[self.basis] = True
        self.frozen = np.zeros(self.ncols, dtype=bool)
        self.iterations = 0
        self.max_iter = max_iter
        self.Acsc = sparse.csc_matrix(self.A)
        # the starting basis is made of unit slack/artificial columns, so
        # B0 = I until the first refactorisation; later bases are kept as a
        # sparse LU of B0 followed by one eta column per pivot
        self.lu = None
        self.etas: list[tuple[int, float, np.ndarray, np.ndarray]] = []
        self.recompute_xb()

    def refactor(self):
        self.etas = []
        if self.m:
            B = self.Acsc[:, self.basis].tocsc()
            try:
                self.lu = splu(B, permc_spec="COLAMD")
            except RuntimeError:
                raise NumericalFailure("singular basis during refactorisation") from None
        self.recompute_xb()

    def ftran(self, v: np.ndarray) -> np.ndarray:
        """``B^-1 v``."""
        v = self.lu.solve(v) if self.lu is not None else v.copy()
        for r, piv, idx, val in self.etas:
            t = v[r] / piv
            if t != 0.0:
                v[idx] -= t * val
            v[r] = t
        return v

    def btran(self, w: np.ndarray) -> np.ndarray:
        """``w B^-1``."""
        w = w.copy()
        for r, piv, idx, val in reversed(self.etas):
            # idx excludes r, so the dot product skips the pivot entry
            w[r] = (w[r] - w[idx] @ val) / piv
        return self.lu.solve(w, trans="T") if self.lu is not None else w

    def _rhs(self):
        rhs = self.b.copy()
        up = np.flatnonzero(self.at_upper)
        if up.size:
            rhs -= self.A[:, up] @ self.u[up]
        return rhs

    def recompute_xb(self):
        self.xB = self.ftran(self._rhs()) if self.m else np.zeros(0)

    def accurate(self, tol: float = 1e-10) -> bool:
        if not self.m:
            return True
        resid = self.A[:, self.basis] @ self.xB - self._rhs()
        return float(np.abs(resid).max()) <= tol * (1.0 + float(np.abs(self.b).max()))

    def run(self, cost: np.ndarray) -> str:
        bland = False
        streak = 0
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"simplex iteration limit {self.max_iter} reached")
            y = self.btran(cost[self.basis]) if self.m else np.zeros(0)
            d = cost - self.AT @ y
            scale = OPT_TOL * (1.0 + np.abs(cost))
            eligible = ~self.is_basic & ~self.frozen
            improve_up = eligible & ~self.at_upper & (d < -scale)
            improve_dn = eligible & self.at_upper & (d > scale)
            cand = improve_up | improve_dn
            if not cand.any():
                return "Optimal"
            if bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                j = int(np.argmax(score))
            direction = 1.0 if improve_up[j] else -1.0
            col = np.zeros(self.m)
            col[self.col_rows[j]] = self.col_vals[j]
            alpha = self.ftran(col)
            step = direction * alpha  # xB moves by -theta * step

            theta = self.u[j]  # bound flip distance
            leave = -1
            leave_to_upper = False
            best_piv = 0.0
            pos = step > PIVOT_TOL
            neg = step < -PIVOT_TOL
            ratios = np.full(self.m, math.inf)
            xb = self.xB
            ratios[pos] = np.maximum(xb[pos], 0.0) / step[pos]
            ub = self.u[self.basis]
            negfin = neg & np.isfinite(ub)
            ratios[negfin] = np.maximum(ub[negfin] - xb[negfin], 0.0) / (-step[negfin])
            if self.m:
                rmin = ratios.min()
                if rmin < theta:
                    ties = np.flatnonzero(ratios <= rmin + 1e-12 * (1.0 + rmin))
                    if bland:
                        r = int(ties[np.argmin(self.basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(step[ties]))])
                    theta = ratios[r]
                    leave = r
                    leave_to_upper = bool(step[r] < 0)
                    best_piv = abs(alpha[r])
            if not math.isfinite(theta):
                return "Unbounded"

            self.iterations += 1
            if theta <= 1e-12:
                streak += 1
                if streak >= DEGENERACY_STREAK:
                    bland = True
            else:
                streak = 0
                bland = False

            if leave < 0:
                # entering variable hits its own opposite bound
                self.xB -= theta * step
                self.at_upper[j] = not self.at_upper[j]
                continue

            if best_piv < PIVOT_TOL:
                raise NumericalFailure("pivot element below tolerance")
            entering_value = (self.u[j] - theta) if self.at_upper[j] else theta
            self.xB -= theta * step
            old = self.basis[leave]
            self.is_basic[old] = False
            self.at_upper[old] = leave_to_upper
            self.basis[leave] = j
            self.is_basic[j] = True
            self.at_upper[j] = False
            self.xB[leave] = entering_value

            nz = np.flatnonzero(alpha)
            nz = nz[nz != leave]
            self.etas.append((leave, float(alpha[leave]), nz, alpha[nz]))
            if len(self.etas) >= REFACTOR_EVERY:
                self.refactor()

    def values(self) -> np.ndarray:
        y = np.where(self.at_upper, self.u, 0.0)
        y[self.basis] = self.xB
        return y


def solve_lp(prob: LpProblem, lo: np.ndarray | None = None, hi: np.ndarray | None = None,
             backend: str = "simplex") -> LpSolution:
    """Solve the continuous problem (binary flags ignored).

    ``lo``/``hi`` override the problem's own bounds, which is how
    branch-and-bound passes node restrictions.
    """
    lo = prob.lo if lo is None else np.asarray(lo, dtype=float)
    hi = prob.hi if hi is None else np.asarray(hi, dtype=float)
    if np.any(lo > hi + 1e-12):
        return LpSolution("Infeasible", np.full(prob.num_vars, np.nan), math.nan, 0)
    if backend == "highs":
        from .highs import solve_lp_highs

        return solve_lp_highs(prob, lo, hi)
    if backend != "simplex":
        raise ValueError(f"unknown LP backend {backend!r}")

    sf = _StandardForm(prob, lo, hi)
    m, ncols = sf.A.shape
    spx = _Simplex(sf, max_iter=20_000 + 50 * (m + ncols))

    if sf.n_art:
        phase1 = np.zeros(ncols)
        phase1[sf.n_real:] = 1.0
        spx.run(phase1)
        spx.recompute_xb()
        infeas = float(spx.values()[sf.n_real:].sum())
        if infeas > FEAS_TOL * (1.0 + float(np.abs(sf.b).max(initial=0.0))):
            return LpSolution("Infeasible", np.full(prob.num_vars, np.nan), math.nan,
                              spx.iterations)
        spx.u[sf.n_real:] = 0.0
        spx.frozen[sf.n_real:] = True
        spx.recompute_xb()

    status = spx.run(sf.c)
    if status == "Unbounded":
        return LpSolution("Unbounded", np.full(prob.num_vars, np.nan), -math.inf,
                          spx.iterations)
    spx.recompute_xb()
    if not spx.accurate():
        spx.refactor()
    y = spx.values()
    x = sf.to_user(y)
    # snap tiny bound violations from round-off
    x = np.minimum(np.maximum(x, lo), hi)
    if prob.max_violation(x) > FEAS_TOL * 10:
        raise NumericalFailure(
            f"simplex returned a point violating constraints by {prob.max_violation(x):.3g}"
        )
    return LpSolution("Optimal", x, float(prob.c @ x), spx.iterations)
