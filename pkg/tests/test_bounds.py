"""Bound initialization: FIB, blind bounds, min-cost policy, worst-cost LP."""

import numpy as np
import pytest

from rcpomdp.bounds import (
    AlphaPairSet,
    alpha_eval,
    blind_lower_bound,
    cmax_upper_bound,
    fib_bound,
    make_bound_set,
    solve_min_cost_policy,
)
from rcpomdp.errors import EmptySet
from rcpomdp.model import TabularCPomdp

from conftest import random_stochastic_model
from oracles import ce_best, ce_enumerate_policies, expectimax_bracket, mdp_value_iteration


def single_state_model(r=1.0, c=0.0, gamma=0.5):
    return TabularCPomdp(
        ("s",), ("a",), ("o",),
        np.ones((1, 1, 1)), np.ones((1, 1, 1)),
        np.full((1, 1), r), np.full((1, 1), c),
        gamma, np.array([1.0]), 1.0,
    )


# --- alpha evaluation ---------------------------------------------------------


def test_alpha_eval_single_vector():
    assert alpha_eval(np.array([[1.0, 0.0]]), np.array([0.5, 0.5]), "max") == 0.5


def test_alpha_eval_componentwise_max_min():
    alphas = np.array([[1.0, 0.0], [0.0, 1.0]])
    b = np.array([0.3, 0.7])
    assert alpha_eval(alphas, b, "max") == pytest.approx(0.7)
    assert alpha_eval(alphas, b, "min") == pytest.approx(0.3)


def test_alpha_eval_empty_set_raises():
    with pytest.raises(EmptySet):
        alpha_eval(np.zeros((0, 2)), np.array([0.5, 0.5]), "max")


# --- fast informed bound ---------------------------------------------------------


def test_fib_geometric_series():
    m = single_state_model(r=1.0, gamma=0.5)
    alphas = fib_bound(m, "reward")
    assert alphas[0, 0] == pytest.approx(2.0, abs=1e-5)


def test_fib_cost_zero_for_free_model():
    rng = np.random.default_rng(0)
    m = random_stochastic_model(rng)
    m = TabularCPomdp(m.states, m.actions, m.observations, m.T, m.Z, m.R,
                      np.zeros_like(m.C), m.gamma, m.b0, m.c_hat)
    alphas = fib_bound(m, "cost")
    assert np.allclose(alphas, 0.0, atol=1e-9)


def test_fib_matches_mdp_value_iteration_under_full_observability():
    rng = np.random.default_rng(8)
    T = rng.random((2, 2, 2)) + 0.1
    T /= T.sum(axis=2, keepdims=True)
    R = rng.normal(size=(2, 2))
    # identity observations reveal the arrival state
    Z = np.zeros((2, 2, 2))
    Z[0, :, 0] = 1.0
    Z[1, :, 1] = 1.0
    m = TabularCPomdp(("s0", "s1"), ("a0", "a1"), ("o0", "o1"), T, Z, R,
                      np.zeros((2, 2)), 0.9, np.array([0.6, 0.4]), 1.0)
    v_star, q_star = mdp_value_iteration(T, R, 0.9)
    alphas = fib_bound(m, "reward", tol=1e-9)
    fib_values = alphas.max(axis=0)
    assert np.allclose(fib_values, v_star, atol=1e-5)


def test_fib_residuals_non_increasing():
    rng = np.random.default_rng(21)
    m = random_stochastic_model(rng, ns=4, na=3, no=2)
    history = []
    fib_bound(m, "reward", residual_history=history)
    diffs = np.diff(history)
    assert np.all(diffs <= 1e-12)


# --- blind bounds ------------------------------------------------------------------


def test_blind_geometric_series():
    m = single_state_model(r=1.0, gamma=0.5)
    alphas = blind_lower_bound(m, "reward")
    assert alphas[0, 0] == pytest.approx(2.0, abs=1e-9)


def test_blind_below_fib_at_random_beliefs(ce, tiger, tunnels, crs44):
    rng = np.random.default_rng(9)
    for model in (ce, tiger, tunnels, crs44):
        fib = fib_bound(model, "reward")
        blind = blind_lower_bound(model, "reward")
        for _ in range(100):
            b = rng.random(model.n_states)
            b /= b.sum()
            assert alpha_eval(blind, b, "max") <= alpha_eval(fib, b, "max") + 1e-6


def test_ce_blind_bound_below_enumeration_optimum(ce):
    # no policy beats the enumerated unconstrained optimum of 12
    policies = ce_enumerate_policies(ce)
    best = max(p["v_r"] for p in policies)
    blind = blind_lower_bound(ce, "reward")
    assert alpha_eval(blind, ce.b0, "max") <= best + 1e-9
    assert alpha_eval(blind, ce.b0, "max") <= 12.0 + 1e-9


def test_bounds_bracket_exact_value_on_small_models():
    rng = np.random.default_rng(33)
    for _ in range(8):
        m = random_stochastic_model(rng, ns=3, na=2, no=2, gamma=0.6)
        lo, hi = expectimax_bracket(m, m.b0, depth=6)
        fib = alpha_eval(fib_bound(m, "reward", tol=1e-9), m.b0, "max")
        blind = alpha_eval(blind_lower_bound(m, "reward"), m.b0, "max")
        assert fib >= lo - 1e-6
        assert blind <= hi + 1e-6


# --- minimum-cost policy --------------------------------------------------------------


def test_min_cost_policy_zero_for_free_model():
    rng = np.random.default_rng(2)
    m = random_stochastic_model(rng)
    m = TabularCPomdp(m.states, m.actions, m.observations, m.T, m.Z, m.R,
                      np.zeros_like(m.C), m.gamma, m.b0, m.c_hat)
    pairs = solve_min_cost_policy(m, time_budget=3.0, rng=np.random.default_rng(0))
    assert pairs.cost_at(m.b0) == pytest.approx(0.0, abs=1e-9)
    assert np.all(pairs.alpha_c @ m.b0 >= -1e-9)


def test_ce_min_cost_matches_enumeration(ce):
    policies = ce_enumerate_policies(ce)
    min_cost = min(p["v_c"] for p in policies)
    pairs = solve_min_cost_policy(ce, time_budget=5.0, rng=np.random.default_rng(0))
    assert pairs.cost_at(ce.b0) == pytest.approx(min_cost, abs=1e-6)
    assert pairs.cost_at(ce.b0) == pytest.approx(3.5, abs=1e-4)
    # the scout action opens the cheap branch
    assert pairs.action_at(ce.b0) == 0


def test_tiger_min_cost_never_listens(tiger):
    pairs = solve_min_cost_policy(tiger, time_budget=3.0, rng=np.random.default_rng(0))
    assert pairs.cost_at(tiger.b0) == pytest.approx(0.0, abs=1e-9)
    assert pairs.action_at(tiger.b0) != 0  # anything but listen


# --- worst one-step cost LP --------------------------------------------------------


def _pairs(alpha_c_rows):
    rows = np.array(alpha_c_rows, dtype=float)
    return AlphaPairSet(
        actions=np.zeros(len(rows), dtype=int),
        alpha_r=np.zeros_like(rows),
        alpha_c=rows,
    )


def test_cmax_zero_vectors():
    assert cmax_upper_bound(_pairs([[0.0, 0.0]])) == pytest.approx(0.0)


def test_cmax_crossing_vectors_matches_grid_search():
    pairs = _pairs([[1.0, 0.0], [0.0, 1.0]])
    grid = np.linspace(0.0, 1.0, 10001)
    best = max(min(p, 1 - p) for p in grid)
    val = cmax_upper_bound(pairs)
    assert val == pytest.approx(best, abs=1e-4)
    assert val == pytest.approx(0.5, abs=1e-9)


def test_cmax_constant_vector():
    assert cmax_upper_bound(_pairs([[2.0, 2.0]])) == pytest.approx(2.0)


def test_cmax_dominates_pointwise_min_at_random_beliefs():
    rng = np.random.default_rng(4)
    pairs = _pairs(rng.random((5, 4)) * 3)
    val = cmax_upper_bound(pairs)
    for _ in range(1000):
        b = rng.random(4)
        b /= b.sum()
        assert val >= (pairs.alpha_c @ b).min() - 1e-9


# --- bound set -------------------------------------------------------------------------


def test_bound_set_orderings(ce):
    rng = np.random.default_rng(6)
    gamma_cmin = solve_min_cost_policy(ce, time_budget=3.0, rng=np.random.default_rng(0))
    bounds = make_bound_set(ce, gamma_cmin)
    for _ in range(200):
        b = rng.random(ce.n_states)
        b /= b.sum()
        assert bounds.reward_lower(b) <= bounds.reward_upper(b) + 1e-6
        assert bounds.cost_lower(b) <= bounds.cost_upper(b) + 1e-6


def test_alpha_pair_serialization_round_trip(ce):
    pairs = solve_min_cost_policy(ce, time_budget=2.0, rng=np.random.default_rng(0))
    clone = AlphaPairSet.from_dict(pairs.to_dict())
    assert np.array_equal(clone.actions, pairs.actions)
    assert np.array_equal(clone.alpha_r, pairs.alpha_r)
    assert np.array_equal(clone.alpha_c, pairs.alpha_c)
