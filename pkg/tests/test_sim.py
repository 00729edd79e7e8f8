"""Monte-Carlo harness: rollouts, aggregation, determinism, exports."""

import csv
import json

import numpy as np
import pytest

from rcpomdp.model import History, TabularCPomdp, cumulative_cost_W
from rcpomdp.pointbased import PairedAlphaSet
from rcpomdp.sim import (
    MinCostPolicy,
    MixedPolicyRunner,
    TreePolicy,
    aggregate,
    evaluate,
    policy_from_dict,
    rollout,
    trial_rng,
    write_aggregate_json,
    write_trials_csv,
    write_trajectories_csv,
)
from rcpomdp.arcs import tree_to_dict
from rcpomdp.baseline import MixedPolicy, PolicyColumn
from rcpomdp.bounds import AlphaPairSet


class FixedActionPolicy:
    def __init__(self, action):
        self.action = action

    def session(self, rng):
        policy = self

        class S:
            def act(self, belief, d):
                return policy.action

            def observe(self, action, observation):
                pass

        return S()


def one_step_model():
    T = np.zeros((2, 1, 2))
    T[0, 0, 1] = 1.0
    T[1, 0, 1] = 1.0
    Z = np.ones((2, 1, 1))
    R = np.array([[1.0], [0.0]])
    C = np.zeros((2, 1))
    return TabularCPomdp(("start", "end"), ("go",), ("o",), T, Z, R, C, 0.9,
                         np.array([1.0, 0.0]), 1.0)


def test_deterministic_single_step_rollout():
    m = one_step_model()
    run = rollout(m, FixedActionPolicy(0), horizon=5, rng=np.random.default_rng(0))
    assert run.discounted_reward == pytest.approx(1.0)
    assert run.discounted_cost == pytest.approx(0.0)
    assert not run.violated
    assert run.steps == 1  # terminal reached after one step


def test_ce_commit_policy_violates_on_rocky_branch(ce):
    # replaying the budget recursion by hand: 5 -> ~5 -> negative after the
    # 8-cost commit at the scouted-rocky belief
    violated = []
    for i in range(200):
        run = rollout(ce, FixedActionPolicy(0), horizon=5, rng=trial_rng(3, i),
                      record_trajectory=True)
        violated.append(run.violated)
        saw_rocky = run.trajectory[0].observation == 0
        assert run.violated == saw_rocky
    rate = np.mean(violated)
    assert 0.35 < rate < 0.65


def test_ce_certified_policy_all_rollouts_clean(ce, ce_arcs):
    policy = TreePolicy.from_result(ce_arcs.result)
    agg, runs = evaluate(ce, policy, trials=500, seed=11878)
    assert agg.violation_rate == 0.0
    assert agg.mean_reward == pytest.approx(10.0, abs=1e-9)
    assert agg.mean_cost == pytest.approx(5.0, abs=1e-9)
    assert agg.sem_reward == 0.0


def test_discounted_cost_equals_history_replay(ce, tiger):
    for model in (ce, tiger):
        run = rollout(model, FixedActionPolicy(0), horizon=8,
                      rng=trial_rng(5, 0), record_trajectory=True)
        h = History(tuple((row.action, row.observation) for row in run.trajectory))
        assert run.discounted_cost == pytest.approx(
            cumulative_cost_W(model, model.b0, h), abs=1e-9
        )


def test_violation_flag_matches_closed_form(tiger):
    # listening forever must overrun the budget of 3 after a few steps
    run = rollout(tiger, FixedActionPolicy(0), horizon=10, rng=trial_rng(6, 0),
                  record_trajectory=True)
    assert run.violated
    ds = [row.d for row in run.trajectory]
    # closed form: gamma^{-t} (c_hat - W(h_t))
    h = History()
    for t, row in enumerate(run.trajectory):
        h = h.extend(row.action, row.observation)
        w = cumulative_cost_W(tiger, tiger.b0, h)
        closed = (tiger.c_hat - w) / tiger.gamma ** (t + 1)
        assert ds[t] == pytest.approx(closed, abs=1e-6)
    assert min(ds) < -1e-9


def test_evaluate_is_bit_deterministic(ce, ce_arcs):
    policy = TreePolicy.from_result(ce_arcs.result)
    a1, _ = evaluate(ce, policy, trials=50, seed=123)
    a2, _ = evaluate(ce, policy, trials=50, seed=123)
    assert a1 == a2


def test_single_trial_has_zero_sem(ce, ce_arcs):
    policy = TreePolicy.from_result(ce_arcs.result)
    agg, runs = evaluate(ce, policy, trials=1, seed=9)
    assert agg.trials == 1
    assert agg.sem_reward == 0.0
    assert agg.sem_cost == 0.0


def test_zero_cost_policy_never_violates(tiger):
    never_listen = FixedActionPolicy(1)
    agg, _ = evaluate(tiger, never_listen, trials=300, seed=2)
    assert agg.violation_rate == 0.0
    assert agg.mean_cost == 0.0


def test_mixed_policy_sampling_uses_weights(ce):
    commit = PolicyColumn(
        plans=PairedAlphaSet(np.array([0]), np.zeros((1, 5)), np.zeros((1, 5)),
                             np.zeros((1, 5))),
        value_r=12.0, value_c=5.0,
    )
    circumvent = PolicyColumn(
        plans=PairedAlphaSet(np.array([1]), np.zeros((1, 5)), np.zeros((1, 5)),
                             np.zeros((1, 5))),
        value_r=10.0, value_c=5.0,
    )
    mixed = MixedPolicy(columns=[commit, circumvent], weights=np.array([0.25, 0.75]))
    runner = MixedPolicyRunner(mixed)
    first_actions = []
    for i in range(400):
        sess = runner.session(trial_rng(1, i))
        first_actions.append(sess.act(ce.b0, ce.c_hat))
    share = np.mean([a == 0 for a in first_actions])
    assert 0.15 < share < 0.35


def test_policy_artifact_round_trip(ce, ce_arcs):
    data = json.loads(json.dumps(tree_to_dict(ce_arcs.result)))
    policy = policy_from_dict(data, ce)
    agg, _ = evaluate(ce, policy, trials=100, seed=11878)
    assert agg.mean_reward == pytest.approx(10.0, abs=1e-9)
    assert agg.violation_rate == 0.0


def test_min_cost_policy_adapter(ce, ce_arcs):
    policy = MinCostPolicy(ce_arcs.result.gamma_cmin)
    agg, _ = evaluate(ce, policy, trials=100, seed=4)
    assert agg.violation_rate == 0.0
    assert agg.mean_cost == pytest.approx(3.5, abs=0.5)


def test_csv_and_json_exports(tmp_path, ce, ce_arcs):
    policy = TreePolicy.from_result(ce_arcs.result)
    agg, runs = evaluate(ce, policy, trials=5, seed=1, record_trajectories=True)
    trials_csv = tmp_path / "trials.csv"
    agg_json = tmp_path / "agg.json"
    traj_csv = tmp_path / "traj.csv"
    write_trials_csv(trials_csv, runs)
    write_aggregate_json(agg_json, agg)
    write_trajectories_csv(traj_csv, runs)

    with open(trials_csv) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["trial", "reward", "cost", "violated", "steps"]
    assert len(rows) == 6
    assert float(rows[1][1]) == pytest.approx(10.0)

    data = json.loads(agg_json.read_text())
    assert set(data) == {
        "trials", "mean_reward", "sem_reward", "mean_cost", "sem_cost", "violation_rate",
    }

    with open(traj_csv) as fh:
        traj_rows = list(csv.reader(fh))
    assert traj_rows[0] == ["trial", "step", "state", "action", "observation", "d"]
    assert len(traj_rows) > 1
