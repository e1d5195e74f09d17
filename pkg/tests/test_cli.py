import csv
import json

import numpy as np
import pytest

from wdrsp.cli import main
from wdrsp.graph import toy_network, write_network


@pytest.fixture
def toy_files(tmp_path):
    write_network(toy_network(), tmp_path / "net.csv", tmp_path / "net.json")
    (tmp_path / "one.csv").write_text("1.5,1.5,3.5\n")
    (tmp_path / "two.csv").write_text("1.5,1.5,3.5\n2,1.2,2.5\n")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def net_args(d):
    return ["--network", d / "net.csv", "--sidecar", d / "net.json"]


def test_solve_first_scenario(toy_files, capsys):
    code, out, _ = run(capsys, "solve", *net_args(toy_files), "--samples", toy_files / "one.csv",
                       "--alpha", 1, "--epsilon", 0)
    doc = json.loads(out)
    assert code == 0 and doc["objective"] == 3.0 and doc["path"] == ["1->2", "2->3"]


def test_alpha_zero_exits_one(toy_files, capsys):
    code, out, err = run(capsys, "solve", *net_args(toy_files), "--samples", toy_files / "one.csv",
                         "--alpha", 0)
    assert code == 1 and json.loads(err)["error"] == "AlphaOutOfRange" and out == ""


def test_missing_flag_is_usage_error(toy_files, capsys):
    code, _, _ = run(capsys, "solve", *net_args(toy_files), "--alpha", 0.5)
    assert code == 1


def test_l2_solve_refused_but_evaluate_allowed(toy_files, capsys):
    base = ["--samples", toy_files / "two.csv", "--alpha", 0.5, "--epsilon", 0.1, "--norm", "l2"]
    code, _, err = run(capsys, "solve", *net_args(toy_files), *base)
    assert code == 1 and json.loads(err)["error"] == "UnsupportedNorm"
    code, out, _ = run(capsys, "evaluate", *net_args(toy_files), *base, "--path", "1->3")
    assert code == 0 and json.loads(out)["objective"] == pytest.approx(3.5 + 0.1 / 0.5)


def test_solve_evaluate_roundtrip_and_worst_dist(toy_files, capsys):
    sol = toy_files / "sol.json"
    args = [*net_args(toy_files), "--samples", toy_files / "two.csv"]
    code, _, _ = run(capsys, "solve", *args, "--alpha", 0.5, "--epsilon", 0.3, "--norm", "linf",
                     "--support", "--widen-upper", 1, "--out", sol, "--dump-lp", toy_files / "m.lp")
    assert code == 0 and "binary" in (toy_files / "m.lp").read_text()
    stored = json.loads(sol.read_text())

    code, out, _ = run(capsys, "evaluate", *args, "--solution", sol)
    assert code == 0 and abs(json.loads(out)["objective"] - stored["objective"]) <= 1e-8

    pts = toy_files / "pts.csv"
    code, out, _ = run(capsys, "worst-dist", *args, "--solution", sol, "--points-out", pts)
    doc = json.loads(out)
    assert code == 0 and doc["verification"]["all_passed"]
    rows = list(csv.reader(open(pts)))
    assert len(rows) == doc["num_atoms"] and all(len(r) == 3 for r in rows)


def test_inputs_left_untouched(toy_files, capsys):
    before = {p.name: p.read_bytes() for p in toy_files.iterdir()}
    run(capsys, "solve", *net_args(toy_files), "--samples", toy_files / "two.csv", "--alpha", 0.5,
        "--epsilon", 0.2, "--support")
    assert {p.name: p.read_bytes() for p in toy_files.iterdir()} == before


def test_bicriteria_csv(toy_files, capsys):
    (toy_files / "cost.csv").write_text("2\n2\n1\n")
    (toy_files / "w.csv").write_text("lambda1,lambda2\n0,1\n1,1\n")
    code, out, _ = run(capsys, "bicriteria", *net_args(toy_files), "--samples", toy_files / "one.csv",
                       "--alpha", 1, "--cost", toy_files / "cost.csv", "--weights", toy_files / "w.csv")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "lambda1,lambda2,cost,wmett,path"
    assert lines[1].endswith("1->2 2->3") and lines[2].endswith("1->3")


def test_mcf_command(tmp_path, capsys):
    (tmp_path / "arcs.csv").write_text("tail,head\n0,1\n")
    (tmp_path / "cap.csv").write_text("5\n")
    (tmp_path / "sup.csv").write_text("3\n-3\n")
    (tmp_path / "cost.csv").write_text("2\n")
    code, out, _ = run(capsys, "mcf", "--network", tmp_path / "arcs.csv", "--capacities", tmp_path / "cap.csv",
                       "--supplies", tmp_path / "sup.csv", "--costs", tmp_path / "cost.csv",
                       "--epsilon", 1, "--flow-out", tmp_path / "flow.csv")
    doc = json.loads(out)
    assert code == 0 and doc["objective"] == 9.0 and doc["mean_cost_plus_radius_norm"] == 9.0
    assert (tmp_path / "flow.csv").read_text() == "tail,head,flow\n0,1,3\n"


def test_experiment_command_is_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        code, _, _ = run(capsys, "experiment", "compare", "--grid", "2x3", "--sizes", "8", "--trials", 2,
                         "--test-size", 50, "--outdir", tmp_path / name, "--alpha", 0.2)
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir()})
    assert outs[0] == outs[1] and "compare.json" in outs[0]


def test_bad_network_file(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("1\n")
    code, _, err = run(capsys, "solve", "--network", tmp_path / "nope.csv", "--origin", 0,
                       "--destination", 1, "--samples", tmp_path / "s.csv", "--alpha", 0.5)
    assert code == 1 and json.loads(err)["error"] == "IoError"
