import json

import numpy as np
import pytest

from wdrsp.drsp import solve_saa
from wdrsp.errors import BadMu, BadValue
from wdrsp.experiments import (
    ExperimentReport,
    MixtureGenerator,
    compare_methods,
    generate_instance,
    grid_network,
    out_of_sample,
    percentage_difference,
    radius_sweep,
    sample_size_sweep,
    skewed_mu,
    split_train,
    trend_slope,
    tune_radius,
)
from wdrsp.graph import enumerate_paths, make_path, toy_network, validate_network
from wdrsp.samples import SampleSet


def test_same_seed_same_draws():
    a = generate_instance([1.0, 2.0, 3.0], 10, 20, seed=7)
    b = generate_instance([1.0, 2.0, 3.0], 10, 20, seed=7)
    assert all(np.array_equal(x.data, y.data) for x, y in zip(a, b))
    c = generate_instance([1.0, 2.0, 3.0], 10, 20, seed=8)
    assert not np.array_equal(a[0].data, c[0].data)


def test_uniform_share_has_half_mean():
    gen = MixtureGenerator(np.array([1.0]), seed=0, mix=0.0)
    rows = gen.sample(20_000).data
    assert rows.mean() == pytest.approx(0.5, abs=0.01) and rows.min() >= 0 and rows.max() <= 1


def test_gaussian_share_moments_before_clipping():
    gen = MixtureGenerator(np.array([100.0]), seed=1, mix=1.0)
    rows = gen.sample(20_000).data
    # N(100, variance 1000) is almost never clipped at 0
    assert rows.mean() == pytest.approx(100, abs=1.0) and rows.var() == pytest.approx(1000, rel=0.05)


def test_draws_are_nonnegative():
    train, test = generate_instance(skewed_mu(20), 50, 200, seed=3)
    assert train.data.min() >= 0 and test.data.min() >= 0 and test.N == 200


def test_generator_errors():
    with pytest.raises(BadMu):
        MixtureGenerator([1.0, 0.0])
    with pytest.raises(BadMu):
        MixtureGenerator([])
    with pytest.raises(BadValue):
        generate_instance([1.0], 0, 5)


def test_out_of_sample_examples(toy_samples):
    net = toy_network()
    s = SampleSet(toy_samples)
    path = make_path(net, [0, 1])
    assert out_of_sample(path, s, 1.0) == pytest.approx(3.1)
    same = SampleSet(np.tile([1.0, 2.0, 4.0], (5, 1)))
    assert out_of_sample(path, same, 0.2) == pytest.approx(3.0)
    sol = solve_saa(net, s, 0.5)
    assert out_of_sample(sol.path, s, 0.5) == pytest.approx(sol.objective, abs=1e-12)


def test_percentage_difference_sign():
    assert percentage_difference(90.0, 100.0) == pytest.approx(-10.0)
    assert percentage_difference(100.0, 100.0) == 0.0


def test_grid_networks():
    net = validate_network(grid_network(2, 3))
    assert net.m == 6 and net.n == 7 and len(enumerate_paths(net)) == 3
    diag = validate_network(grid_network(3, 4, diagonals=True))
    lengths = {len(p) for p in enumerate_paths(diag)}
    assert len(lengths) > 1


def test_skewed_means_are_positive_and_seeded():
    assert np.array_equal(skewed_mu(10, seed=4), skewed_mu(10, seed=4))
    assert np.all(skewed_mu(10) > 0)


def test_split_keeps_rows():
    s = SampleSet(np.arange(20.0).reshape(10, 2))
    fit, val = split_train(s, 0)
    assert fit.N == 8 and val.N == 2
    assert sorted(np.vstack([fit.data, val.data])[:, 0].tolist()) == s.data[:, 0].tolist()


def test_trend_slope():
    assert trend_slope([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert trend_slope([5], [1]) == 0.0


NET = grid_network(2, 3, diagonals=True)
MU = skewed_mu(NET.n, seed=1)


def test_zero_radius_sweep_is_saa():
    rep = radius_sweep(NET, MU, 0.2, 15, [0.0], trials=3, seed=0, N_test=200)
    assert all(r["out_of_sample"] == r["saa_out_of_sample"] for r in rep.records)
    assert rep.aggregates[0]["percentage_difference"] == 0.0


def test_radius_sweep_shape():
    rep = radius_sweep(NET, MU, 0.2, 10, [0.0, 0.1, 1.0], trials=2, seed=0, support=True, N_test=100)
    assert len(rep.records) == 6 and len(rep.aggregates) == 3
    assert {r["method"] for r in rep.records} == {"DRSP-S"}
    with pytest.raises(BadValue):
        radius_sweep(NET, MU, 0.2, 10, [-0.1], trials=1)


def test_single_size_sweep_has_one_row():
    rep = sample_size_sweep(NET, MU, 0.2, 0.05, [12], trials=2, seed=0, N_test=100)
    assert len(rep.aggregates) == 1 and rep.config["trend_slope"] == 0.0


def test_tuned_radius_comes_from_grid():
    train, _ = generate_instance(MU, 20, 10, seed=2)
    eps = tune_radius(NET, train, 0.2, False, grid=(0.0, 0.1, 0.5))
    assert eps in (0.0, 0.1, 0.5)


def test_zero_radius_grid_gives_zero_difference():
    rep = compare_methods(NET, MU, 0.2, [10], trials=3, seed=0, grid=(0.0,), N_test=100)
    for row in rep.records:
        assert row["percentage_difference"] == 0.0
    for agg in rep.aggregates:
        assert agg["mean_percentage_difference"] == 0.0 and agg["share_not_worse"] == 1.0


def test_report_output_is_byte_stable(tmp_path):
    kw = dict(trials=2, seed=5, N_test=100)
    a = compare_methods(NET, MU, 0.2, [8, 12], grid=(0.0, 0.1), **kw)
    b = compare_methods(NET, MU, 0.2, [8, 12], grid=(0.0, 0.1), **kw)
    pa = a.write(tmp_path / "a")
    pb = b.write(tmp_path / "b")
    for key in pa:
        assert pa[key].read_bytes() == pb[key].read_bytes()
    doc = json.loads(a.to_json())
    assert "timings" not in doc and len(doc["records"]) == 2 * 2 * 3
    assert "timings" in json.loads(a.to_json(include_timing=True))


def test_report_csv_layout():
    rep = ExperimentReport("x", {"a": 1}, records=[
        {"method": "B", "N": 1, "epsilon": 0.0, "trial": 0, "out_of_sample": 1 / 3},
        {"method": "A", "N": 1, "epsilon": 0.0, "trial": 0, "out_of_sample": 2.0},
    ])
    lines = rep.records_csv().splitlines()
    assert lines[0] == "method,N,epsilon,trial,out_of_sample"
    assert lines[1].startswith("A,") and lines[2].endswith("0.333333333333")
