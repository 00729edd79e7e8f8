"""Column generation: policy-graph evaluation, master LP behavior, closed loop."""

import numpy as np
import pytest

from rcpomdp.baseline import (
    CgcpConfig,
    MixedPolicy,
    PolicyColumn,
    evaluate_policy_columns,
    solve_cgcp,
    solve_cgcp_closed_loop,
)
from rcpomdp.model import TabularCPomdp, belief_update
from rcpomdp.pointbased import PairedAlphaSet

from conftest import random_stochastic_model
from oracles import ce_best, ce_enumerate_policies


def fixed_action_plans(model, action):
    """A single-plan set whose greedy choice is always ``action``."""
    ns = model.n_states
    return PairedAlphaSet(
        actions=np.array([action]),
        obj=np.zeros((1, ns)),
        rew=np.zeros((1, ns)),
        cost=np.zeros((1, ns)),
    )


# --- policy-graph evaluation ----------------------------------------------------


def test_commit_policy_value_matches_hand_computation(ce):
    val = evaluate_policy_columns(ce, fixed_action_plans(ce, 0))
    assert val.value_r == pytest.approx(12.0, abs=1e-4)
    assert val.value_c == pytest.approx(5.0, abs=1e-4)
    assert val.tail_r == 0.0  # every branch reaches the terminal state


def test_circumvent_policy_value(ce):
    val = evaluate_policy_columns(ce, fixed_action_plans(ce, 1))
    assert val.value_r == pytest.approx(10.0, abs=1e-9)
    assert val.value_c == pytest.approx(5.0, abs=1e-9)


def test_zero_model_evaluates_to_zero():
    rng = np.random.default_rng(1)
    m = random_stochastic_model(rng)
    m = TabularCPomdp(m.states, m.actions, m.observations, m.T, m.Z,
                      np.zeros_like(m.R), np.zeros_like(m.C), m.gamma, m.b0, 1.0)
    val = evaluate_policy_columns(m, fixed_action_plans(m, 0))
    assert val.value_r == pytest.approx(0.0, abs=1e-12)
    assert val.value_c == pytest.approx(0.0, abs=1e-12)


def test_recurrent_policy_evaluates_through_cycles(tiger):
    # opening forever revisits the uniform belief; value is the closed form
    val = evaluate_policy_columns(tiger, fixed_action_plans(tiger, 1))
    expected = -45.0 / (1.0 - tiger.gamma)
    assert val.value_r == pytest.approx(expected, abs=1e-6)
    assert val.value_c == pytest.approx(0.0, abs=1e-12)


def test_column_values_match_alpha_prediction(ce, ce_cgcp):
    mixed, _, _ = ce_cgcp
    for col in mixed.columns:
        row = col.plans.greedy(ce.b0)
        pred_r = float(col.plans.rew[row] @ ce.b0)
        pred_c = float(col.plans.cost[row] @ ce.b0)
        assert col.value_r == pytest.approx(pred_r, abs=1e-4)
        assert col.value_c == pytest.approx(pred_c, abs=1e-4)


# --- column generation ------------------------------------------------------------


def test_ce_mixture_reproduces_root_constrained_optimum(ce, ce_cgcp):
    mixed, _, _ = ce_cgcp
    vr, vc = mixed.mixture_value()
    assert vr == pytest.approx(12.0, abs=0.01)
    assert vc <= ce.c_hat + 1e-6


def test_ce_mixture_beats_every_admissible_deterministic_policy(ce, ce_cgcp):
    mixed, _, _ = ce_cgcp
    vr, _ = mixed.mixture_value()
    best_adm = ce_best(ce_enumerate_policies(ce), "recursively_admissible")
    assert vr > best_adm["v_r"] + 1.0  # the root-only optimum strictly exceeds 10


def test_master_objective_monotone_and_budget_respected(ce, ce_cgcp):
    _, history, _ = ce_cgcp
    values = [h[0] for h in history]
    costs = [h[1] for h in history]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    assert all(c <= ce.c_hat + 1e-6 for c in costs)


def test_free_model_returns_single_unconstrained_column():
    rng = np.random.default_rng(19)
    m = random_stochastic_model(rng, gamma=0.8)
    m = TabularCPomdp(m.states, m.actions, m.observations, m.T, m.Z, m.R,
                      np.zeros_like(m.C), m.gamma, m.b0, 1.0)
    mixed = solve_cgcp(m, CgcpConfig(time_budget=20.0, max_iterations=10))
    assert len(mixed.columns) == 1
    assert mixed.weights[0] == pytest.approx(1.0)
    assert mixed.mixture_value()[1] == pytest.approx(0.0, abs=1e-9)


def test_slack_budget_drives_dual_price_to_zero(ce):
    from dataclasses import replace

    slack = replace(ce, c_hat=100.0)
    history = []
    mixed = solve_cgcp(slack, CgcpConfig(time_budget=30.0), history=history)
    vr, _ = mixed.mixture_value()
    assert vr == pytest.approx(12.0, abs=0.01)  # unconstrained optimum
    assert history[-1][2] == pytest.approx(0.0, abs=1e-9)


def test_mixture_serialization_round_trip(ce_cgcp):
    mixed, _, _ = ce_cgcp
    clone = MixedPolicy.from_dict(mixed.to_dict())
    assert np.allclose(clone.weights, mixed.weights)
    assert clone.mixture_value() == mixed.mixture_value()


# --- closed loop --------------------------------------------------------------------


def test_closed_loop_matches_open_loop_at_root(ce):
    act = solve_cgcp_closed_loop(ce, per_step_budget=2.0)
    rng = np.random.default_rng(0)
    assert act(ce.b0, ce.c_hat, rng) == 0  # commit, like the open-loop mixture


def test_closed_loop_replans_away_from_overrun(ce):
    act = solve_cgcp_closed_loop(ce, per_step_budget=2.0)
    rng = np.random.default_rng(0)
    b1 = belief_update(ce, ce.b0, 0, 0)
    # with the original budget, committing at the scouted-rocky belief overruns
    assert act(b1, 5.0, rng) == 1
    # with a generous budget the commit action returns
    assert act(b1, 100.0, rng) == 0


def test_closed_loop_negative_budget_uses_min_cost_action(ce):
    act = solve_cgcp_closed_loop(ce, per_step_budget=2.0)
    rng = np.random.default_rng(0)
    b1 = belief_update(ce, ce.b0, 0, 0)
    b2 = belief_update(ce, ce.b0, 0, 1)
    assert act(b1, -1.0, rng) == 1  # cheap circumvent
    assert act(b2, -1.0, rng) == 0  # committing is cheaper there
