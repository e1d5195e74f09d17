"""Command-line front end: ``wdrsp <command> [options]``.

File formats
  network   CSV with header ``tail,head`` (0-based vertex ids), plus an
            optional JSON sidecar ``{"origin", "destination", "num_vertices",
            "labels"}``; flags override the sidecar.
  samples   headerless CSV, one row per sample, one column per arc.
  result    JSON with ``path``, ``objective``, ``t_star``, ``lambda_star``,
            ``timings`` and the run ``config``; numbers carry 12 significant
            digits.

Exit status: 0 success, 1 input error, 2 solver failure. Errors are printed
to stderr as ``{"error": <name>, "message": ...}``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bicriteria import BiCriteriaSpec, solve_bicriteria
from .drsp import build_model, build_saa, check_alpha, evaluate_path, solve_drsp
from .errors import BadValue, IoError, NodeLimit, UnsupportedNorm, WdrspError
from .experiments import (
    DEFAULT_TEST_SIZE,
    RADIUS_GRID,
    compare_methods,
    grid_network,
    radius_sweep,
    sample_size_sweep,
    skewed_mu,
)
from .graph import Network, load_network, path_from_arcs, read_arc_csv
from .mcf import FlowNetwork, robust_flow_cost, solve_drmcf
from .samples import AmbiguitySpec, SampleSet, load_samples, norm_name, parse_norm, support_box
from .worstcase import verify_worst_case, worst_case_distribution


class UsageError(WdrspError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _round(obj):
    """Recursively round floats to 12 significant digits for output."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.12g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(_round(doc), indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_vector(path: str, name: str) -> np.ndarray:
    """Numbers from a CSV: one row, or one value per line."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {name} file {path}: {exc}") from None
    vals = []
    for tok in text.replace("\n", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(float(tok))
        except ValueError:
            raise BadValue(f"{path}: non-numeric {name} entry {tok!r}") from None
    return np.array(vals)


# shared arguments ------------------------------------------------------------

def _net_args(p):
    p.add_argument("--network", required=True, help="arc CSV with header tail,head")
    p.add_argument("--sidecar", help="JSON with origin, destination, num_vertices, labels")
    p.add_argument("--origin", type=int)
    p.add_argument("--destination", type=int)
    p.add_argument("--num-vertices", type=int)


def _model_args(p, need_alpha=True):
    p.add_argument("--samples", required=True, help="headerless sample CSV (rows x arcs)")
    p.add_argument("--alpha", type=float, required=need_alpha, default=None,
                   help="tail probability in (0, 1]")
    p.add_argument("--epsilon", type=float, default=None, help="Wasserstein radius (default 0)")
    p.add_argument("--norm", default=None, help="ground norm: l1, l2 or linf (default l1)")
    p.add_argument("--support", action="store_true", default=None,
                   help="restrict the ball to the componentwise sample min/max box")
    p.add_argument("--widen-lower", type=float, default=None, help="lower the box bound by this much")
    p.add_argument("--widen-upper", type=float, default=None, help="raise the box bound by this much")
    p.add_argument("--backend", choices=("simplex", "highs"), default="simplex")


def _load_net(a) -> Network:
    return load_network(a.network, a.sidecar, a.origin, a.destination, a.num_vertices)


def _config(a, stored: dict | None = None) -> dict:
    """Model settings from flags, falling back to a stored result's config."""
    stored = stored or {}

    def pick(name, default):
        v = getattr(a, name, None)
        return v if v is not None else stored.get(name, default)

    cfg = {
        "alpha": pick("alpha", None),
        "epsilon": pick("epsilon", 0.0),
        "norm": norm_name(parse_norm(pick("norm", "l1"))),
        "support": bool(pick("support", False)),
        "widen_lower": pick("widen_lower", 0.0),
        "widen_upper": pick("widen_upper", 0.0),
    }
    if cfg["alpha"] is None:
        raise UsageError("--alpha is required")
    check_alpha(cfg["alpha"])
    return cfg


def _spec(cfg: dict, samples: SampleSet) -> AmbiguitySpec:
    box = None
    if cfg["support"]:
        box = support_box(samples).widen(cfg["widen_lower"], cfg["widen_upper"])
    return AmbiguitySpec(cfg["epsilon"], parse_norm(cfg["norm"]), box)


def _inputs(a, stored=None):
    net = _load_net(a)
    samples = load_samples(a.samples, net.n)
    cfg = _config(a, stored)
    return net, samples, cfg, _spec(cfg, samples)


def _solution_doc(net, sol, cfg, elapsed) -> dict:
    return {
        "path": sol.path.describe(net),
        "path_arcs": list(sol.path.arc_sequence),
        "objective": sol.objective,
        "t_star": sol.t_star,
        "lambda_star": sol.lambda_star,
        "mip_objective": sol.mip_objective,
        "best_bound": sol.best_bound,
        "nodes_explored": sol.nodes_explored,
        "status": sol.extra.get("status", "Optimal"),
        "timings": {"solve_seconds": elapsed},
        "config": cfg,
    }


def _solve(net, samples, cfg, spec, a):
    if spec.norm_p == 2.0:
        raise UnsupportedNorm("the l2 ground norm makes the path problem a mixed 0-1 SOCP; "
                              "use it with 'evaluate' on a fixed path")
    if spec.radius == 0.0 and spec.support is None:
        model = build_saa(net, samples, cfg["alpha"])
    else:
        model = build_model(net, samples, spec, cfg["alpha"])
    if getattr(a, "dump_lp", None):
        Path(a.dump_lp).write_text(model.lp.dump())
    t0 = time.perf_counter()
    sol = solve_drsp(model, backend=a.backend, node_limit=getattr(a, "node_limit", 100_000))
    return sol, time.perf_counter() - t0


# commands ----------------------------------------------------------------------

def cmd_solve(a) -> int:
    net, samples, cfg, spec = _inputs(a)
    sol, elapsed = _solve(net, samples, cfg, spec, a)
    _emit(_solution_doc(net, sol, cfg, elapsed), a.out)
    if sol.extra.get("status") == "NodeLimit":
        raise NodeLimit(f"node limit reached; incumbent gap {sol.mip_objective - sol.best_bound:.3g}")
    return 0


def _read_solution(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read solution {path}: {exc}") from None


def cmd_evaluate(a) -> int:
    stored = _read_solution(a.solution) if a.solution else None
    net, samples, cfg, spec = _inputs(a, stored["config"] if stored else None)
    if a.path:
        labels = [s.strip() for s in a.path.split(",") if s.strip()]
    elif stored:
        labels = stored["path"]
    else:
        raise UsageError("give --path or --solution")
    path = path_from_arcs(net, labels)
    t0 = time.perf_counter()
    fp = evaluate_path(path, samples, spec, cfg["alpha"], backend=a.backend)
    doc = {
        "path": path.describe(net),
        "path_arcs": list(path.arc_sequence),
        "objective": fp.value,
        "t_star": fp.t_star,
        "lambda_star": fp.lam,
        "timings": {"solve_seconds": time.perf_counter() - t0},
        "config": cfg,
    }
    if stored is not None:
        doc["stored_objective"] = stored.get("objective")
    _emit(doc, a.out)
    return 0


def cmd_worst_dist(a) -> int:
    stored = _read_solution(a.solution) if a.solution else None
    net, samples, cfg, spec = _inputs(a, stored["config"] if stored else None)
    sol, _ = _solve(net, samples, cfg, spec, a)
    if stored is not None and stored.get("path") != sol.path.describe(net):
        # keep the stored path if it is an alternative optimum
        path = path_from_arcs(net, stored["path"])
        fp = evaluate_path(path, samples, spec, cfg["alpha"], backend="exact")
        sol.path, sol.t_star, sol.objective = path, fp.t_star, fp.value
        sol.lambda_star, sol.per_sample_s = fp.lam, fp.s
    wc = worst_case_distribution(sol, samples, spec, cfg["alpha"], backend=a.backend)
    rep = verify_worst_case(wc, sol, samples, spec, cfg["alpha"])
    if a.points_out:
        with open(a.points_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in wc.points:
                w.writerow([f"{v:.12g}" for v in row])
    doc = {
        "path": sol.path.describe(net),
        "t_star": sol.t_star,
        "objective": sol.objective,
        "transport_cost": wc.transport_cost,
        "num_atoms": wc.num_atoms,
        "weights": wc.weights.tolist(),
        "origin": wc.origin.tolist(),
        "verification": rep.to_dict(),
        "config": cfg,
    }
    _emit(doc, a.out)
    return 0 if rep.all_passed else 2


def _read_weights(path: str) -> list[tuple[float, float]]:
    try:
        rows = list(csv.reader(open(path, newline="")))
    except OSError as exc:
        raise IoError(f"cannot read weights {path}: {exc}") from None
    pairs = []
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row if c.strip()]
        if not cells:
            continue
        if lineno == 1 and cells[0].lower().startswith("lambda"):
            continue
        if len(cells) != 2:
            raise BadValue(f"{path}:{lineno}: expected lambda1,lambda2")
        try:
            pairs.append((float(cells[0]), float(cells[1])))
        except ValueError:
            raise BadValue(f"{path}:{lineno}: non-numeric weight") from None
    return pairs


def cmd_bicriteria(a) -> int:
    net, samples, cfg, spec = _inputs(a)
    bspec = BiCriteriaSpec(_read_vector(a.cost, "cost"), tuple(_read_weights(a.weights)))
    results = solve_bicriteria(net, samples, spec, cfg["alpha"], bspec, backend=a.backend)
    out = open(a.out, "w", newline="") if a.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["lambda1", "lambda2", "cost", "wmett", "path"])
        for r in results:
            w.writerow([f"{r.weights[0]:.12g}", f"{r.weights[1]:.12g}", f"{r.cost_value:.12g}",
                        f"{r.wmett:.12g}", " ".join(r.solution.path.describe(net))])
    finally:
        if a.out:
            out.close()
    return 0


def cmd_mcf(a) -> int:
    arcs = read_arc_csv(a.network)
    caps = _read_vector(a.capacities, "capacity")
    sup = _read_vector(a.supplies, "supply")
    m = a.num_vertices if a.num_vertices is not None else len(sup)
    net = Network(m, tuple(arcs), 0, m - 1)
    fnet = FlowNetwork(net, caps, sup, load_samples(a.costs, len(arcs)))
    eps = 0.0 if a.epsilon is None else a.epsilon
    t0 = time.perf_counter()
    sol = solve_drmcf(fnet, eps)
    elapsed = time.perf_counter() - t0
    if a.flow_out:
        with open(a.flow_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tail", "head", "flow"])
            for (u, v), x in zip(arcs, sol.x):
                w.writerow([u, v, f"{x:.12g}"])
    _emit({"objective": sol.objective,
           "mean_cost_plus_radius_norm": robust_flow_cost(fnet, sol.x, eps),
           "flow": sol.x.tolist(), "epsilon": eps,
           "timings": {"solve_seconds": elapsed}}, a.out)
    return 0


def _experiment_setup(a):
    cfg = {}
    if a.config:
        try:
            cfg = json.loads(Path(a.config).read_text())
        except (OSError, ValueError) as exc:
            raise IoError(f"cannot read config {a.config}: {exc}") from None

    def pick(name, default):
        v = getattr(a, name, None)
        return v if v is not None else cfg.get(name, default)

    if pick("network", None):
        net = load_network(pick("network", None), pick("sidecar", None))
    else:
        rows, cols = (int(x) for x in str(pick("grid", "3x4")).lower().split("x"))
        net = grid_network(rows, cols, diagonals=True)
    mu_file = pick("mu", None)
    mu = _read_vector(mu_file, "mu") if mu_file else skewed_mu(net.n, int(pick("mu_seed", 0)))
    norm = pick("norm", None)
    return net, mu, pick, (parse_norm(norm) if norm is not None else None)


def _floats(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def cmd_experiment(a) -> int:
    net, mu, pick, norm = _experiment_setup(a)
    alpha = float(pick("alpha", 0.1))
    trials = int(pick("trials", 10))
    seed = int(pick("seed", 0))
    n_test = int(pick("test_size", DEFAULT_TEST_SIZE))
    backend = pick("backend", "highs")
    support = bool(pick("support", False))
    if a.kind == "radius-sweep":
        radii = _floats(pick("radii", None)) or list(RADIUS_GRID)
        rep = radius_sweep(net, mu, alpha, int(pick("N", 30)), radii, trials, seed, support,
                           norm, n_test, backend)
    elif a.kind == "size-sweep":
        sizes = [int(x) for x in _floats(pick("sizes", "30,50,70"))]
        eps = pick("epsilon", 0.1)
        eps = None if eps == "tuned" else float(eps)
        rep = sample_size_sweep(net, mu, alpha, eps, sizes, trials, seed, support, norm, n_test,
                                backend=backend)
    else:
        sizes = [int(x) for x in _floats(pick("sizes", "30"))]
        rep = compare_methods(net, mu, alpha, sizes, trials, seed, N_test=n_test, norm_p=norm,
                              support_norm_p=norm, backend=backend)
    paths = rep.write(pick("outdir", "."), include_timing=bool(pick("timings", False)))
    _emit({k: str(v) for k, v in paths.items()}, None)
    return 0


# parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wdrsp", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"wdrsp {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="optimal robust path (SAA when epsilon is 0)")
    _net_args(s)
    _model_args(s)
    s.add_argument("--node-limit", type=int, default=100_000)
    s.add_argument("--dump-lp", help="write the 0-1 model as a plain-text tableau")
    s.add_argument("--out", help="result JSON (default stdout)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("evaluate", help="worst-case mean excess of a fixed path")
    _net_args(s)
    _model_args(s, need_alpha=False)
    s.add_argument("--path", help="comma-separated arc labels, e.g. '1->2,2->3'")
    s.add_argument("--solution", help="result JSON from 'solve'; its config fills unset flags")
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("worst-dist", help="worst-case distribution of the optimal path")
    _net_args(s)
    _model_args(s, need_alpha=False)
    s.add_argument("--solution", help="result JSON from 'solve'")
    s.add_argument("--node-limit", type=int, default=100_000)
    s.add_argument("--points-out", help="CSV of the moved sample points")
    s.add_argument("--out", help="verification report JSON (default stdout)")
    s.set_defaults(func=cmd_worst_dist)

    s = sub.add_parser("bicriteria", help="weighted cost / robust mean excess trade-off")
    _net_args(s)
    _model_args(s)
    s.add_argument("--cost", required=True, help="deterministic arc costs")
    s.add_argument("--weights", required=True, help="CSV rows lambda1,lambda2")
    s.add_argument("--out", help="CSV lambda1,lambda2,cost,wmett,path (default stdout)")
    s.set_defaults(func=cmd_bicriteria)

    s = sub.add_parser("mcf", help="robust min-cost flow (linf ground norm)")
    s.add_argument("--network", required=True, help="arc CSV with header tail,head")
    s.add_argument("--num-vertices", type=int)
    s.add_argument("--capacities", required=True, help="one capacity per arc")
    s.add_argument("--supplies", required=True, help="one supply per vertex (negative = demand)")
    s.add_argument("--costs", required=True, help="headerless arc-cost sample CSV")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--flow-out", help="CSV tail,head,flow")
    s.add_argument("--out", help="objective JSON (default stdout)")
    s.set_defaults(func=cmd_mcf)

    s = sub.add_parser("experiment", help="out-of-sample experiments on mixture data")
    s.add_argument("kind", choices=("radius-sweep", "size-sweep", "compare"))
    s.add_argument("--config", help="JSON with any of the options below")
    s.add_argument("--network")
    s.add_argument("--sidecar")
    s.add_argument("--grid", help="synthetic grid stand-in ROWSxCOLS (default 3x4)")
    s.add_argument("--mu", help="arc means file (default: seeded lognormal)")
    s.add_argument("--mu-seed", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--N", type=int, help="training size (radius-sweep)")
    s.add_argument("--radii", help="comma list (radius-sweep; default the tuning grid)")
    s.add_argument("--sizes", help="comma list of training sizes")
    s.add_argument("--epsilon", help="radius for size-sweep, or 'tuned'")
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--support", action="store_true", default=None)
    s.add_argument("--norm")
    s.add_argument("--test-size", type=int)
    s.add_argument("--backend", choices=("simplex", "highs"))
    s.add_argument("--outdir")
    s.add_argument("--timings", action="store_true", default=None,
                   help="also write wall-clock times (not reproducible)")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except WdrspError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
