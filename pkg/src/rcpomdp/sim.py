"""Monte-Carlo execution of policies with violation, reward, and cost accounting.

A policy exposes ``session(rng)``; the returned session maps the current
(belief, remaining admissible cost) to an action and is told each realized
(action, observation) pair.  Rollouts accumulate realized rewards and
belief-expected costs per step; the latter is exactly the quantity the
admissible-cost recursion consumes, so a rollout's discounted cost equals the
history's cumulative expected cost when beliefs are replayed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .arcs import ArcsResult, d_update
from .baseline import MixedPolicy, solve_cgcp_closed_loop
from .bounds import AlphaPairSet
from .model import TabularCPomdp, belief_update, expected_cost

VIOLATION_TOL = -1e-9


@dataclass
class TrajectoryStep:
    step: int
    state: int
    belief_digest: int  # most likely state before acting
    action: int
    observation: int
    d: float  # remaining admissible cost after the step


@dataclass
class RunMetrics:
    discounted_reward: float
    discounted_cost: float
    violated: bool
    steps: int
    trajectory: list | None = None


@dataclass
class AggregateMetrics:
    trials: int
    mean_reward: float
    sem_reward: float
    mean_cost: float
    sem_cost: float
    violation_rate: float

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "mean_reward": self.mean_reward,
            "sem_reward": self.sem_reward,
            "mean_cost": self.mean_cost,
            "sem_cost": self.sem_cost,
            "violation_rate": self.violation_rate,
        }


# --- policy adapters ---------------------------------------------------------


class MinCostPolicy:
    """Greedy execution of the min-cost alpha pairs; ignores the budget."""

    def __init__(self, gamma_cmin: AlphaPairSet):
        self.gamma_cmin = gamma_cmin

    def session(self, rng):
        return _MinCostSession(self.gamma_cmin)


class _MinCostSession:
    def __init__(self, gamma_cmin):
        self.gamma_cmin = gamma_cmin

    def act(self, belief, d) -> int:
        return self.gamma_cmin.action_at(belief)

    def observe(self, action, observation):
        pass


class TreePolicy:
    """Follow the search tree's selected actions; min-cost policy off-tree."""

    def __init__(self, nodes, root_id: int, gamma_cmin: AlphaPairSet, tol: float = 1e-6):
        self.nodes = nodes  # id -> _PolicyNode
        self.root_id = root_id
        self.gamma_cmin = gamma_cmin
        self.tol = tol

    @classmethod
    def from_result(cls, result: ArcsResult) -> "TreePolicy":
        nodes = {}
        for node in result.tree.nodes:
            children = {}
            for a, stat in enumerate(node.stats):
                for o, child in enumerate(stat.children):
                    if child is not None:
                        children[(a, o)] = child.node_id
            nodes[node.node_id] = _PolicyNode(
                belief=np.asarray(node.belief),
                d=node.d,
                action=None if node.selected_action is None else int(node.selected_action),
                pruned=bool(node.pruned),
                children=children,
            )
        return cls(nodes, result.tree.root.node_id, result.gamma_cmin)

    @classmethod
    def from_dict(cls, data: dict) -> "TreePolicy":
        nodes = {}
        root_id = None
        for row in data["nodes"]:
            children = {}
            for key, cid in row.get("children", {}).items():
                a, o = key.split(",")
                children[(int(a), int(o))] = cid
            nodes[row["id"]] = _PolicyNode(
                belief=np.array(row["belief"], dtype=float),
                d=float(row["d"]),
                action=row.get("action"),
                pruned=bool(row.get("pruned", False)),
                children=children,
            )
            if row.get("depth", None) == 0:
                root_id = row["id"]
        gamma_cmin = AlphaPairSet.from_dict(data["gamma_cmin"])
        return cls(nodes, root_id if root_id is not None else 0, gamma_cmin)

    def session(self, rng):
        return _TreeSession(self)


@dataclass
class _PolicyNode:
    belief: np.ndarray
    d: float
    action: int | None
    pruned: bool
    children: dict


class _TreeSession:
    def __init__(self, policy: TreePolicy):
        self.policy = policy
        self.node_id = policy.root_id

    def act(self, belief, d) -> int:
        pol = self.policy
        if self.node_id is not None:
            node = pol.nodes[self.node_id]
            on_node = (
                abs(node.d - d) <= pol.tol
                and np.abs(node.belief - belief).sum() <= pol.tol
            )
            if on_node and node.action is not None and not node.pruned:
                return node.action
            self.node_id = None  # off-tree (or dead end): min-cost fallback
        return pol.gamma_cmin.action_at(belief)

    def observe(self, action, observation):
        if self.node_id is None:
            return
        self.node_id = self.policy.nodes[self.node_id].children.get((action, observation))


class MixedPolicyRunner:
    """Sample one column per rollout, then follow its plan set greedily."""

    def __init__(self, mixed: MixedPolicy):
        self.mixed = mixed

    def session(self, rng):
        weights = self.mixed.weights / self.mixed.weights.sum()
        idx = int(rng.choice(len(weights), p=weights))
        return _ColumnSession(self.mixed.columns[idx].plans)


class _ColumnSession:
    def __init__(self, plans):
        self.plans = plans

    def act(self, belief, d) -> int:
        return self.plans.greedy_action(belief)

    def observe(self, action, observation):
        pass


class ClosedLoopCgcpPolicy:
    """Re-plans from the current (belief, remaining budget) at every step."""

    def __init__(self, model: TabularCPomdp, per_step_budget: float = 5.0, config=None):
        self._act = solve_cgcp_closed_loop(model, per_step_budget, config)

    def session(self, rng):
        return _ClosedLoopSession(self._act, rng)


class _ClosedLoopSession:
    def __init__(self, act, rng):
        self._act = act
        self.rng = rng

    def act(self, belief, d) -> int:
        return self._act(belief, d, self.rng)

    def observe(self, action, observation):
        pass


def policy_from_dict(data: dict, model: TabularCPomdp, per_step_budget: float = 5.0):
    """Reconstruct a runnable policy from an exported policy artifact."""
    kind = data.get("type")
    if kind == "arcs":
        return TreePolicy.from_dict(data)
    if kind == "cgcp":
        return MixedPolicyRunner(MixedPolicy.from_dict(data))
    if kind == "mincost":
        return MinCostPolicy(AlphaPairSet.from_dict(data["gamma_cmin"]))
    if kind == "cgcp-cl":
        return ClosedLoopCgcpPolicy(model, per_step_budget=data.get("per_step_budget", per_step_budget))
    raise ValueError(f"unknown policy artifact type {kind!r}")


# --- rollouts ------------------------------------------------------------------


def rollout(
    model: TabularCPomdp,
    policy,
    horizon: int = 20,
    rng: np.random.Generator | None = None,
    record_trajectory: bool = False,
) -> RunMetrics:
    """One Monte-Carlo episode from b0 with admissible-cost tracking."""
    if rng is None:
        rng = np.random.default_rng(0)
    terminal = model.terminal_states()
    session = policy.session(rng)
    b = np.asarray(model.b0, dtype=float)
    s = int(rng.choice(model.n_states, p=b))
    d = model.c_hat
    min_d = d
    disc_reward = 0.0
    disc_cost = 0.0
    scale = 1.0
    steps = 0
    traj = [] if record_trajectory else None
    for t in range(horizon):
        if terminal[s]:
            break
        a = session.act(b, d)
        step_cost = expected_cost(model, b, a)
        disc_reward += scale * float(model.R[s, a])
        disc_cost += scale * step_cost
        d = d_update(d, step_cost, model.gamma)
        min_d = min(min_d, d)
        s_next = int(rng.choice(model.n_states, p=model.T[s, a]))
        o = int(rng.choice(model.n_observations, p=model.Z[s_next, a]))
        b = belief_update(model, b, a, o)
        session.observe(a, o)
        if record_trajectory:
            traj.append(
                TrajectoryStep(
                    step=t, state=s, belief_digest=int(b.argmax()), action=a,
                    observation=o, d=d,
                )
            )
        s = s_next
        scale *= model.gamma
        steps = t + 1
    return RunMetrics(
        discounted_reward=disc_reward,
        discounted_cost=disc_cost,
        violated=min_d < VIOLATION_TOL,
        steps=steps,
        trajectory=traj,
    )


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based per-trial stream: trial i is reproducible in isolation."""
    return np.random.default_rng([seed, trial])


def evaluate(
    model: TabularCPomdp,
    policy,
    trials: int,
    horizon: int = 20,
    seed: int = 11878,
    record_trajectories: bool = False,
):
    """Run independent rollouts and aggregate; deterministic for a fixed seed."""
    runs = [
        rollout(model, policy, horizon=horizon, rng=trial_rng(seed, i),
                record_trajectory=record_trajectories)
        for i in range(trials)
    ]
    return aggregate(runs), runs


def aggregate(runs) -> AggregateMetrics:
    rewards = np.array([r.discounted_reward for r in runs])
    costs = np.array([r.discounted_cost for r in runs])
    n = len(runs)
    sem = lambda x: float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return AggregateMetrics(
        trials=n,
        mean_reward=float(rewards.mean()),
        sem_reward=sem(rewards),
        mean_cost=float(costs.mean()),
        sem_cost=sem(costs),
        violation_rate=float(np.mean([r.violated for r in runs])),
    )


# --- exports -------------------------------------------------------------------


def write_trials_csv(path, runs):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "reward", "cost", "violated", "steps"])
        for i, r in enumerate(runs):
            writer.writerow([i, repr(r.discounted_reward), repr(r.discounted_cost),
                             int(r.violated), r.steps])


def write_aggregate_json(path, agg: AggregateMetrics):
    with open(path, "w") as fh:
        json.dump(agg.to_dict(), fh, indent=2)


def write_trajectories_csv(path, runs):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "step", "state", "action", "observation", "d"])
        for i, r in enumerate(runs):
            for row in r.trajectory or ():
                writer.writerow([i, row.step, row.state, row.action, row.observation,
                                 repr(row.d)])
