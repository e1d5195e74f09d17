import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from instances import random_instance
from wdrsp.drsp import cvar_empirical, path_times, solve_robust
from wdrsp.errors import BudgetNegative, UnsupportedNorm
from wdrsp.graph import Network, enumerate_paths, make_path, toy_network
from wdrsp.samples import AmbiguitySpec, SampleSet, SupportBox, support_box
from wdrsp.worstcase import (
    WorstCaseDistribution,
    sup_over_B,
    transport_cost,
    verify_worst_case,
    worst_case_distribution,
)


def test_zero_radius_returns_samples(toy_samples):
    s = SampleSet(toy_samples)
    path = make_path(toy_network(), [0, 1])
    value, wc = sup_over_B(path, 3.0, s, AmbiguitySpec(0.0, "l1"))
    assert value == pytest.approx(np.maximum(s.data @ path.selected - 3.0, 0).mean())
    assert np.array_equal(wc.points, s.data) and wc.transport_cost == 0.0


def test_single_sample_shift():
    s = SampleSet(np.array([0.0, 0.0, 3.0]))
    path = make_path(toy_network(), [2])
    value, wc = sup_over_B(path, 2.0, s, AmbiguitySpec(0.5, "l1"))
    assert value == pytest.approx(1.5)
    assert wc.points.tolist() == [[0.0, 0.0, 3.5]]


def test_budget_goes_to_the_top_sample():
    s = SampleSet(np.array([[0.0, 0.0, 3.0], [0.0, 0.0, 1.0]]))
    path = make_path(toy_network(), [2])
    value, wc = sup_over_B(path, 2.5, s, AmbiguitySpec(0.5, "l1"))
    assert value == pytest.approx(0.75)
    assert wc.points[:, 2].tolist() == [4.0, 1.0]
    # the other split of the budget is worse
    assert np.maximum(np.array([3.0, 2.0]) - 2.5, 0).mean() < value


def test_negative_budget_rejected(toy_samples):
    path = make_path(toy_network(), [2])
    spec = AmbiguitySpec(0.0)
    object.__setattr__(spec, "radius", -1.0)
    with pytest.raises(BudgetNegative):
        sup_over_B(path, 0.0, SampleSet(toy_samples), spec)


def test_l2_with_box_refused(toy_samples):
    s = SampleSet(toy_samples)
    with pytest.raises(UnsupportedNorm):
        sup_over_B(make_path(toy_network(), [2]), 0.0, s, AmbiguitySpec(0.1, "l2", support_box(s)))


def test_l2_direction_without_box(toy_samples):
    s = SampleSet(toy_samples)
    path = make_path(toy_network(), [0, 1])
    value, wc = sup_over_B(path, 3.2, s, AmbiguitySpec(0.5, "l2"))
    # budget 1.0 along (1, 1)/sqrt(2) raises the path time by sqrt(2)
    assert value == pytest.approx((3.2 + math.sqrt(2) - 3.2) / 2)
    assert wc.transport_cost == pytest.approx(0.5)


def test_large_radius_saturates_at_upper_corner():
    net = toy_network()
    s = SampleSet(np.array([[1.0, 2.0, 5.0], [2.0, 1.0, 4.0]]))
    box = support_box(s)
    eps = s.N * float((box.upper - box.lower).sum()) + 1.0
    spec = AmbiguitySpec(eps, "l1", box)
    sol = solve_robust(net, s, spec, 0.5)
    assert sol.objective == pytest.approx(min(box.upper @ p.selected for p in enumerate_paths(net)), abs=1e-9)
    assert verify_worst_case(worst_case_distribution(sol, s, spec, 0.5), sol, s, spec, 0.5).all_passed
    # raising every path arc of every sample to the box top is within budget and attains the value
    pts = s.data.copy()
    on = sol.path.selected == 1
    pts[:, on] = box.upper[on]
    lifted = WorstCaseDistribution(pts, transport_cost(pts, s, 1.0), 1.0)
    assert verify_worst_case(lifted, sol, s, spec, 0.5).all_passed
    assert cvar_empirical(pts @ sol.path.selected, 0.5)[0] == pytest.approx(sol.objective)


def test_doubled_moves_break_the_budget(toy_samples):
    s = SampleSet(toy_samples)
    spec = AmbiguitySpec(0.3, "linf")
    sol = solve_robust(toy_network(), s, spec, 0.5)
    wc = worst_case_distribution(sol, s, spec, 0.5)
    assert verify_worst_case(wc, sol, s, spec, 0.5).all_passed
    pts = s.data + 2 * (wc.points - s.data)
    doubled = WorstCaseDistribution(pts, transport_cost(pts, s, spec.norm_p), spec.norm_p)
    rep = verify_worst_case(doubled, sol, s, spec, 0.5)
    failed = {c.name for c in rep.checks if not c.passed}
    assert "transport_budget" in failed


def test_empirical_passes_at_zero_radius(toy_samples):
    s = SampleSet(toy_samples)
    spec = AmbiguitySpec(0.0, "l1", support_box(s))
    sol = solve_robust(toy_network(), s, spec, 0.5)
    rep = verify_worst_case(WorstCaseDistribution(s.data, 0.0, 1.0), sol, s, spec, 0.5)
    assert rep.all_passed and all(c.residual == 0.0 for c in rep.checks)


def test_equal_atoms_can_fall_short_inside_a_box():
    # 2-arc chain, path times 3, 2, 3. At alpha = 1/4 the mean excess of three
    # equal atoms is their maximum, which a total budget of 0.75 lifts to 3.75.
    # Moving 3/8 of the middle sample's mass to the corner (3, 3) reaches 4.5.
    net = Network(3, ((0, 1), (1, 2)), 0, 2)
    s = SampleSet(np.array([[3.0, 0.0], [1.0, 1.0], [0.0, 3.0]]))
    spec = AmbiguitySpec(0.25, "linf", SupportBox([0.0, 0.0], [3.0, 3.0]))
    alpha = 0.25
    sol = solve_robust(net, s, spec, alpha)
    assert sol.objective == pytest.approx(4.5, abs=1e-9) and sol.t_star == pytest.approx(3.0)

    # best over equal-weight N-point moves, bounded by min over t of t + sup_B(t)/alpha
    bound = min(t + sup_over_B(sol.path, t, s, spec)[0] / alpha for t in np.linspace(2.5, 4.5, 81))
    assert bound <= 4.0 + 1e-9

    wc = worst_case_distribution(sol, s, spec, alpha)
    assert not wc.is_uniform and wc.num_atoms == 4
    moved = wc.origin == 1
    assert sorted(wc.weights[moved].tolist()) == pytest.approx([1 / 3 * 3 / 8, 1 / 3 * 5 / 8])
    assert verify_worst_case(wc, sol, s, spec, alpha).all_passed


@given(st.integers(0, 100_000), st.floats(0, 2), st.floats(-2, 10))
def test_greedy_matches_milp_for_l1_box(seed, eps, t):
    rng = np.random.default_rng(seed)
    net, s = random_instance(rng)
    spec = AmbiguitySpec(eps, "l1", support_box(s).widen(0.0, float(rng.uniform(0, 2))))
    path = enumerate_paths(net)[int(rng.integers(len(enumerate_paths(net))))]
    g, wg = sup_over_B(path, t, s, spec, method="greedy")
    m, _ = sup_over_B(path, t, s, spec, method="milp")
    assert g == pytest.approx(m, abs=1e-8)
    assert wg.transport_cost <= eps + 1e-9 and support_box(s).widen(0, 2).contains(wg.points, 1e-12)


@given(st.integers(0, 100_000), st.sampled_from(["l1", "linf", "l2"]), st.floats(0, 2), st.floats(-2, 10))
def test_free_ball_value_matches_direction_formula(seed, norm, eps, t):
    rng = np.random.default_rng(seed)
    net, s = random_instance(rng)
    path = enumerate_paths(net)[0]
    spec = AmbiguitySpec(eps, norm)
    value, wc = sup_over_B(path, t, s, spec)
    times = path_times(s, path)
    lift = s.N * eps * np.linalg.norm(path.selected, spec.dual_q)
    # the excess is convex in the allocation, so some single sample takes the whole budget
    base = np.maximum(times - t, 0)
    options = [base.sum() - base[i] + max(times[i] + lift - t, 0) for i in range(s.N)]
    assert value == pytest.approx(max(options) / s.N, abs=1e-9)
    assert wc.transport_cost <= eps + 1e-9


@given(st.integers(0, 100_000), st.sampled_from(["l1", "linf"]), st.booleans(),
       st.sampled_from([0.05, 0.5]))
def test_solved_instances_pass_every_check(seed, norm, boxed, eps):
    rng = np.random.default_rng(seed)
    net, s = random_instance(rng)
    alpha = float(rng.choice([0.1, 0.3, 1.0]))
    spec = AmbiguitySpec(eps, norm, support_box(s) if boxed else None)
    sol = solve_robust(net, s, spec, alpha)
    wc = worst_case_distribution(sol, s, spec, alpha)
    rep = verify_worst_case(wc, sol, s, spec, alpha)
    assert rep.all_passed, rep.to_dict()
    # the recovered distribution has mean excess no larger than the robust value at any t
    times = wc.points @ sol.path.selected
    assert float(wc.weights @ times) <= sol.objective + 1e-6
    if boxed is False:
        assert cvar_empirical(path_times(s, sol.path), alpha)[0] <= sol.objective + 1e-9
