import numpy as np
import pytest
from hypothesis import given, strategies as st

from instances import random_instance
from wdrsp.bicriteria import BiCriteriaSpec, solve_bicriteria
from wdrsp.drsp import solve_robust, wmett_fixed_path
from wdrsp.errors import BadWeights, WdrspError
from wdrsp.graph import enumerate_paths, toy_network
from wdrsp.samples import AmbiguitySpec, SampleSet, support_box


def test_sweep_switches_path_on_toy():
    # cost favours 1->3 (1 vs 4), samples favour 1->2->3 (3.0 vs 3.5):
    # the two-arc path wins exactly while w1/w2 < 1/6
    net = toy_network()
    s = SampleSet(np.array([1.5, 1.5, 3.5]))
    pairs = ((0, 1), (0.1, 1), (0.5, 1), (1, 1), (1, 0))
    res = solve_bicriteria(net, s, AmbiguitySpec(0.0, "linf"), 1.0, BiCriteriaSpec([2, 2, 1], pairs))
    assert [r.solution.path.arc_sequence for r in res] == [(0, 1), (0, 1), (2,), (2,), (2,)]
    assert [r.cost_value for r in res] == [4, 4, 1, 1, 1]
    assert res[2].scalarized == pytest.approx(0.5 * 1 + 3.5)


def test_pure_robust_weight_matches_plain_solve(toy_samples):
    s = SampleSet(toy_samples)
    spec = AmbiguitySpec(0.2, "l1")
    [r] = solve_bicriteria(toy_network(), s, spec, 0.5, BiCriteriaSpec([9, 9, 9], ((0, 1),)))
    assert r.wmett == pytest.approx(solve_robust(toy_network(), s, spec, 0.5).objective, abs=1e-12)


def test_box_refused(toy_samples):
    s = SampleSet(toy_samples)
    with pytest.raises(WdrspError):
        solve_bicriteria(toy_network(), s, AmbiguitySpec(0.1, "l1", support_box(s)), 0.5,
                         BiCriteriaSpec([1, 1, 1], ((1, 1),)))


@pytest.mark.parametrize("pairs", [((0, 0),), ((-1, 1),), ((1, float("nan")),), (), ((1, 2, 3),)])
def test_bad_weights(pairs):
    with pytest.raises(BadWeights):
        BiCriteriaSpec([1.0, 2.0], pairs)


@given(st.integers(0, 100_000), st.sampled_from(["l1", "linf"]),
       st.tuples(st.floats(0, 5), st.floats(0, 5)).filter(lambda w: w[0] + w[1] > 0.01))
def test_scalarized_optimum_matches_enumeration(seed, norm, w):
    rng = np.random.default_rng(seed)
    net, s = random_instance(rng)
    cost = rng.uniform(0, 4, net.n)
    spec = AmbiguitySpec(0.1, norm)
    [r] = solve_bicriteria(net, s, spec, 0.3, BiCriteriaSpec(cost, (w,)))
    best = min(w[0] * cost @ p.selected + w[1] * wmett_fixed_path(p, s, spec, 0.3)[0]
               for p in enumerate_paths(net))
    assert r.scalarized == pytest.approx(best, abs=1e-7)


@given(st.integers(0, 100_000))
def test_pure_cost_weight_is_deterministic_shortest_path(seed):
    rng = np.random.default_rng(seed)
    net, s = random_instance(rng)
    cost = rng.uniform(0, 4, net.n)
    [r] = solve_bicriteria(net, s, AmbiguitySpec(0.1, "l1"), 0.5, BiCriteriaSpec(cost, ((1, 0),)))
    assert r.cost_value == pytest.approx(min(cost @ p.selected for p in enumerate_paths(net)), abs=1e-9)
