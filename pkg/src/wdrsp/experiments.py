"""Out-of-sample experiments on synthetic mixture data.

Every trial draws its own train/test sets from a seeded generator, so a
report depends only on its configuration. Wall-clock times are kept apart
from the deterministic part of a report and are only written on request.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .drsp import build_model, build_saa, check_alpha, cvar_empirical, solve_drsp
from .errors import BadMu, BadValue
from .graph import Network, PathVector
from .samples import AmbiguitySpec, SampleSet, path_times, support_box

RADIUS_GRID = (0.0, 0.001, 0.005, 0.01, 0.05) + tuple(round(0.1 * k, 1) for k in range(1, 11))
DEFAULT_TEST_SIZE = 1000
VALIDATION_SHARE = 0.2


@dataclass(frozen=True)
class MixtureGenerator:
    """Half Gaussian N(mu, 10 mu) (variance), half uniform U(0, mu), clipped at 0."""

    mu: np.ndarray
    seed: int | None = None
    mix: float = 0.5

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).ravel()
        if mu.size == 0 or not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise BadMu("arc means must be finite and positive")
        if not 0.0 <= self.mix <= 1.0:
            raise BadValue("mixture share must lie in [0, 1]")
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)

    def draw(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """``count`` rows: the Gaussian share first, then uniform, then shuffled."""
        n_gauss = int(round(self.mix * count))
        gauss = rng.normal(self.mu, np.sqrt(10.0 * self.mu), size=(n_gauss, self.mu.size))
        unif = rng.uniform(0.0, self.mu, size=(count - n_gauss, self.mu.size))
        rows = np.maximum(np.vstack([gauss, unif]), 0.0)
        return rows[rng.permutation(count)]

    def sample(self, count: int) -> SampleSet:
        return SampleSet(self.draw(count, np.random.default_rng(self.seed)))


def generate_instance(mu, N_train: int, N_test: int = DEFAULT_TEST_SIZE,
                      seed: int | None = 0) -> tuple[SampleSet, SampleSet]:
    gen = MixtureGenerator(mu, seed)
    rng = np.random.default_rng(seed)
    train = SampleSet(gen.draw(N_train, rng)) if N_train > 0 else SampleSet(np.empty((0, gen.mu.size)))
    test = SampleSet(gen.draw(N_test, rng))
    return train, test


def out_of_sample(path: PathVector, test: SampleSet, alpha: float) -> float:
    """Empirical mean excess of the path time over the test rows."""
    return cvar_empirical(path_times(test, path), alpha)[0]


def percentage_difference(dr: float, saa: float) -> float:
    """``(dr / saa - 1) * 100``; negative means the robust path did better."""
    return (dr / saa - 1.0) * 100.0


# synthetic stand-ins for a road network ------------------------------------

def grid_network(rows: int, cols: int, diagonals: bool = False) -> Network:
    """Directed grid, arcs pointing right and down, corner to corner.

    ``diagonals`` adds down-right shortcuts so o-d paths differ in arc count.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise BadValue("grid needs at least two vertices")
    arcs = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                arcs.append((v, v + 1))
            if r + 1 < rows:
                arcs.append((v, v + cols))
            if diagonals and r + 1 < rows and c + 1 < cols:
                arcs.append((v, v + cols + 1))
    labels = tuple(str(v + 1) for v in range(rows * cols))
    return Network(rows * cols, tuple(arcs), 0, rows * cols - 1, labels)


def skewed_mu(n: int, seed: int = 0, scale: float = 2.0, sigma: float = 0.5) -> np.ndarray:
    """Lognormal arc means: most arcs short, a few long."""
    rng = np.random.default_rng(seed)
    return scale * rng.lognormal(0.0, sigma, size=n)


# reports ---------------------------------------------------------------------

def _num(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.12g}")
    if isinstance(v, np.integer):
        return int(v)
    return v


def _cell(v) -> str:
    v = _num(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    records: list[dict] = field(default_factory=list)
    aggregates: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)

    def _sorted_records(self):
        return sorted(self.records, key=lambda r: (r["method"], r["N"], r["epsilon"], r["trial"]))

    def to_json(self, include_timing: bool = False) -> str:
        doc = {
            "kind": self.kind,
            "config": {k: _num(v) if not isinstance(v, (list, tuple)) else [_num(x) for x in v]
                       for k, v in self.config.items()},
            "aggregates": [{k: _num(v) for k, v in a.items()} for a in self.aggregates],
            "records": [{k: _num(v) for k, v in r.items()} for r in self._sorted_records()],
        }
        if include_timing:
            doc["timings"] = [{k: _num(v) for k, v in t.items()} for t in self.timings]
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def _csv(rows: list[dict]) -> str:
        if not rows:
            return ""
        cols = list(rows[0].keys())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r[c]) for c in cols])
        return buf.getvalue()

    def records_csv(self) -> str:
        """Long format, one row per (method, N, epsilon, trial)."""
        return self._csv(self._sorted_records())

    def aggregates_csv(self) -> str:
        return self._csv(self.aggregates)

    def write(self, outdir: str | Path, stem: str | None = None, include_timing: bool = False):
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.kind
        paths = {
            "json": out / f"{stem}.json",
            "records": out / f"{stem}_records.csv",
            "aggregates": out / f"{stem}_aggregates.csv",
        }
        paths["json"].write_text(self.to_json())
        paths["records"].write_text(self.records_csv())
        paths["aggregates"].write_text(self.aggregates_csv())
        if include_timing:
            paths["timings"] = out / f"{stem}_timings.csv"
            paths["timings"].write_text(self._csv(self.timings))
        return paths


# solving helpers ---------------------------------------------------------------

def _default_norm(support: bool) -> float:
    # With the l1 ground norm every path has ||p||_inf = 1, so without a box
    # all objectives shift by the same amount, and with a box the grid radii
    # hardly move the optimum. linf transport charges per path arc.
    return math.inf


def _spec(train: SampleSet, radius: float, support: bool, norm_p) -> AmbiguitySpec:
    p = _default_norm(support) if norm_p is None else norm_p
    return AmbiguitySpec(radius, p, support_box(train) if support else None)


def robust_path(net: Network, train: SampleSet, alpha: float, radius: float, support: bool,
                norm_p=None, backend: str = "highs") -> PathVector:
    if radius == 0.0:
        return solve_drsp(build_saa(net, train, alpha), backend=backend).path
    spec = _spec(train, radius, support, norm_p)
    return solve_drsp(build_model(net, train, spec, alpha), backend=backend).path


def split_train(train: SampleSet, seed) -> tuple[SampleSet, SampleSet]:
    """Seeded 80/20 split; the validation part keeps at least one row."""
    N = train.N
    n_val = max(1, int(round(VALIDATION_SHARE * N))) if N > 1 else 0
    perm = np.random.default_rng(seed).permutation(N)
    if n_val == 0:
        return train, train
    return train.rows(np.sort(perm[n_val:])), train.rows(np.sort(perm[:n_val]))


def tune_radius(net: Network, train: SampleSet, alpha: float, support: bool, norm_p=None,
                grid=RADIUS_GRID, seed=0, backend: str = "highs") -> float:
    """Grid radius with the best validation mean excess (smallest on ties)."""
    fit, val = split_train(train, seed)
    best_eps, best_val = None, math.inf
    cache: dict[tuple, float] = {}
    for eps in sorted(set(float(e) for e in grid)):
        path = robust_path(net, fit, alpha, eps, support, norm_p, backend)
        key = path.arc_sequence
        if key not in cache:
            cache[key] = out_of_sample(path, val, alpha)
        if cache[key] < best_val - 1e-12:
            best_eps, best_val = eps, cache[key]
    return best_eps


def _trial_seed(seed: int, *keys: int) -> list[int]:
    return [int(seed), *map(int, keys)]


# sweeps ------------------------------------------------------------------------

def radius_sweep(net: Network, mu, alpha: float, N: int, radii, trials: int, seed: int = 0,
                 support: bool = False, norm_p=None, N_test: int = DEFAULT_TEST_SIZE,
                 backend: str = "highs") -> ExperimentReport:
    alpha = check_alpha(alpha)
    radii = [float(r) for r in radii]
    if any(r < 0 for r in radii):
        raise BadValue("radii must be nonnegative")
    method = "DRSP-S" if support else "DRSP"
    rep = ExperimentReport("radius-sweep", {
        "alpha": alpha, "N": N, "radii": radii, "trials": trials, "seed": seed,
        "support": support, "norm_p": str(norm_p if norm_p is not None else _default_norm(support)),
        "N_test": N_test})
    saa = []
    for k in range(trials):
        train, test = generate_instance(mu, N, N_test, _trial_seed(seed, k))
        t0 = time.perf_counter()
        saa_path = robust_path(net, train, alpha, 0.0, support, norm_p, backend)
        rep.timings.append({"method": "SAA", "N": N, "epsilon": 0.0, "trial": k,
                            "solve_time": time.perf_counter() - t0})
        saa.append(out_of_sample(saa_path, test, alpha))
        for eps in radii:
            t0 = time.perf_counter()
            path = saa_path if eps == 0.0 else robust_path(net, train, alpha, eps, support, norm_p, backend)
            rep.timings.append({"method": method, "N": N, "epsilon": eps, "trial": k,
                                "solve_time": time.perf_counter() - t0})
            rep.records.append({"method": method, "N": N, "epsilon": eps, "trial": k,
                                "out_of_sample": out_of_sample(path, test, alpha),
                                "saa_out_of_sample": saa[-1]})
    saa_mean = float(np.mean(saa)) if saa else math.nan
    for eps in radii:
        vals = [r["out_of_sample"] for r in rep._sorted_records() if r["epsilon"] == eps]
        mean = float(np.mean(vals)) if vals else math.nan
        rep.aggregates.append({"method": method, "N": N, "epsilon": eps, "mean_out_of_sample": mean,
                               "saa_mean": saa_mean,
                               "percentage_difference": percentage_difference(mean, saa_mean)})
    return rep


def sample_size_sweep(net: Network, mu, alpha: float, epsilon, sizes, trials: int, seed: int = 0,
                      support: bool = False, norm_p=None, N_test: int = DEFAULT_TEST_SIZE,
                      grid=RADIUS_GRID, backend: str = "highs") -> ExperimentReport:
    """Mean out-of-sample value per sample size; ``epsilon=None`` tunes per dataset."""
    alpha = check_alpha(alpha)
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise BadValue("sample sizes must be at least 1")
    method = "DRSP-S" if support else "DRSP"
    rep = ExperimentReport("size-sweep", {
        "alpha": alpha, "epsilon": "tuned" if epsilon is None else float(epsilon), "sizes": sizes,
        "trials": trials, "seed": seed, "support": support,
        "norm_p": str(norm_p if norm_p is not None else _default_norm(support)), "N_test": N_test})
    for N in sizes:
        for k in range(trials):
            train, test = generate_instance(mu, N, N_test, _trial_seed(seed, N, k))
            t0 = time.perf_counter()
            eps = epsilon
            if eps is None:
                eps = tune_radius(net, train, alpha, support, norm_p, grid, _trial_seed(seed, N, k), backend)
            path = robust_path(net, train, alpha, float(eps), support, norm_p, backend)
            rep.timings.append({"method": method, "N": N, "epsilon": float(eps), "trial": k,
                                "solve_time": time.perf_counter() - t0})
            rep.records.append({"method": method, "N": N, "epsilon": float(eps), "trial": k,
                                "out_of_sample": out_of_sample(path, test, alpha)})
    means = []
    for N in sizes:
        vals = [r["out_of_sample"] for r in rep._sorted_records() if r["N"] == N]
        means.append(float(np.mean(vals)))
        rep.aggregates.append({"method": method, "N": N, "mean_out_of_sample": means[-1]})
    rep.config["trend_slope"] = trend_slope(sizes, means)
    rep.config["nonincreasing_steps"] = int(sum(b <= a for a, b in zip(means, means[1:])))
    return rep


def trend_slope(xs, ys) -> float:
    """Least-squares slope of ys on xs (0 for a single point)."""
    if len(xs) < 2:
        return 0.0
    return float(np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)[0])


METHODS = ("SAA", "DRSP", "DRSP-S")


def compare_methods(net: Network, mu, alpha: float, sizes, trials: int, seed: int = 0,
                    methods=METHODS, grid=RADIUS_GRID, N_test: int = DEFAULT_TEST_SIZE,
                    norm_p=None, support_norm_p=None,
                    backend: str = "highs") -> ExperimentReport:
    """SAA against the tuned robust models on shared training sets."""
    alpha = check_alpha(alpha)
    sizes = [int(s) for s in sizes]
    rep = ExperimentReport("compare", {
        "alpha": alpha, "sizes": sizes, "trials": trials, "seed": seed, "methods": list(methods),
        "grid": [float(g) for g in grid], "N_test": N_test})
    for N in sizes:
        for k in range(trials):
            train, test = generate_instance(mu, N, N_test, _trial_seed(seed, N, k))
            saa_val = None
            for method in ("SAA",) + tuple(m for m in methods if m != "SAA"):
                support = method == "DRSP-S"
                nrm = support_norm_p if support else norm_p
                t0 = time.perf_counter()
                if method == "SAA":
                    eps = 0.0
                else:
                    eps = tune_radius(net, train, alpha, support, nrm, grid,
                                      _trial_seed(seed, N, k), backend)
                path = robust_path(net, train, alpha, eps, support, nrm, backend)
                elapsed = time.perf_counter() - t0
                val = out_of_sample(path, test, alpha)
                if method == "SAA":
                    saa_val = val
                    if "SAA" not in methods:
                        continue
                rep.timings.append({"method": method, "N": N, "epsilon": eps, "trial": k,
                                    "solve_time": elapsed})
                rep.records.append({"method": method, "N": N, "epsilon": eps, "trial": k,
                                    "out_of_sample": val,
                                    "percentage_difference": percentage_difference(val, saa_val),
                                    "path": " ".join(map(str, path.arc_sequence))})
    recs = rep._sorted_records()
    for method in methods:
        for N in sizes:
            rows = [r for r in recs if r["method"] == method and r["N"] == N]
            pct = [r["percentage_difference"] for r in rows]
            times = [t["solve_time"] for t in rep.timings if t["method"] == method and t["N"] == N]
            rep.aggregates.append({
                "method": method, "N": N,
                "mean_out_of_sample": float(np.mean([r["out_of_sample"] for r in rows])),
                "mean_percentage_difference": float(np.mean(pct)),
                "share_not_worse": float(np.mean([p <= 0.0 for p in pct])),
            })
            rep.timings.append({"method": method, "N": N, "epsilon": "mean", "trial": "all",
                                "solve_time": float(np.mean(times))})
    return rep
