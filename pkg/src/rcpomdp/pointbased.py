"""Anytime point-based value iteration with paired secondary value vectors.

Shared machinery behind the minimum-cost policy solve and the scalarized
column-generation subproblems.  The solver maximizes an arbitrary per-state
objective table while carrying, along the exact same plan choices, the plans'
reward and cost value vectors.  Every returned vector is therefore the value
of an actual executable conditional plan.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import TabularCPomdp

_DEDUPE_DECIMALS = 10


@dataclass
class PairedAlphaSet:
    actions: np.ndarray  # (n,)
    obj: np.ndarray  # (n, S) maximized objective value vectors
    rew: np.ndarray  # (n, S) reward values of the same plans
    cost: np.ndarray  # (n, S) cost values of the same plans

    def __len__(self) -> int:
        return len(self.actions)

    def value_at(self, b: np.ndarray) -> float:
        return float((self.obj @ b).max())

    def greedy(self, b: np.ndarray, tol: float = 1e-12) -> int:
        """Row index of the best plan at b; ties break to the lowest action index."""
        vals = self.obj @ b
        cutoff = vals.max() - tol
        rows = np.flatnonzero(vals >= cutoff)
        return int(min(rows, key=lambda i: (self.actions[i], i)))

    def greedy_action(self, b: np.ndarray) -> int:
        return int(self.actions[self.greedy(b)])


def collect_beliefs(
    model: TabularCPomdp,
    rng: np.random.Generator,
    n_beliefs: int = 200,
    depth: int = 30,
    walks: int = 400,
) -> np.ndarray:
    """Reachable beliefs from b0 via random action/observation walks, deduplicated."""
    seen = {}

    def add(b):
        key = tuple(np.round(b, _DEDUPE_DECIMALS))
        if key not in seen:
            seen[key] = b

    add(model.b0)
    terminal = model.terminal_states()
    for _ in range(walks):
        b = model.b0
        for _ in range(depth):
            if len(seen) >= n_beliefs:
                return np.array(list(seen.values()))
            a = rng.integers(model.n_actions)
            pred = b @ model.T[:, a, :]
            probs = pred @ model.Z[:, a, :]
            total = probs.sum()
            if total <= 0:
                break
            o = rng.choice(model.n_observations, p=probs / total)
            joint = pred * model.Z[:, a, o]
            b = joint / joint.sum()
            add(b)
            if terminal[b.argmax()] and b.max() > 1 - 1e-12:
                break
    return np.array(list(seen.values()))


def blind_paired(model: TabularCPomdp, obj_table: np.ndarray) -> PairedAlphaSet:
    """Stay-with-one-action plans: exact objective/reward/cost fixed points."""
    ns, na = model.n_states, model.n_actions
    eye = np.eye(ns)
    obj = np.empty((na, ns))
    rew = np.empty((na, ns))
    cost = np.empty((na, ns))
    for a in range(na):
        lhs = eye - model.gamma * model.T[:, a, :]
        obj[a] = np.linalg.solve(lhs, obj_table[:, a])
        rew[a] = np.linalg.solve(lhs, model.R[:, a])
        cost[a] = np.linalg.solve(lhs, model.C[:, a])
    return PairedAlphaSet(actions=np.arange(na), obj=obj, rew=rew, cost=cost)


def backup_point(model: TabularCPomdp, gamma_set: PairedAlphaSet, obj_table: np.ndarray, b: np.ndarray):
    """One point-based backup at belief b; returns a new (action, obj, rew, cost) plan."""
    ns, na, no = model.n_states, model.n_actions, model.n_observations
    best = None
    for a in range(na):
        t_a = model.T[:, a, :]
        pred = b @ t_a
        obj_vec = obj_table[:, a].astype(float).copy()
        rew_vec = model.R[:, a].astype(float).copy()
        cost_vec = model.C[:, a].astype(float).copy()
        for o in range(no):
            w = pred * model.Z[:, a, o]
            j = int(np.argmax(gamma_set.obj @ w))
            zcol = model.Z[:, a, o]
            obj_vec += model.gamma * (t_a @ (zcol * gamma_set.obj[j]))
            rew_vec += model.gamma * (t_a @ (zcol * gamma_set.rew[j]))
            cost_vec += model.gamma * (t_a @ (zcol * gamma_set.cost[j]))
        val = obj_vec @ b
        if best is None or val > best[0] + 1e-15:
            best = (val, a, obj_vec, rew_vec, cost_vec)
    _, a, obj_vec, rew_vec, cost_vec = best
    return a, obj_vec, rew_vec, cost_vec


def _prune(gamma_set: PairedAlphaSet) -> PairedAlphaSet:
    """Drop exact duplicates and pointwise-dominated objective vectors."""
    obj = gamma_set.obj
    n = len(gamma_set)
    keys = {}
    order = []
    for i in range(n):
        key = tuple(np.round(obj[i], _DEDUPE_DECIMALS)) + (int(gamma_set.actions[i]),)
        if key not in keys:
            keys[key] = i
            order.append(i)
    keep = []
    for i in order:
        dominated = any(
            j != i and np.all(obj[j] >= obj[i] + 1e-12) for j in order
        )
        if not dominated:
            keep.append(i)
    keep = np.array(keep, dtype=int)
    return PairedAlphaSet(
        actions=gamma_set.actions[keep],
        obj=gamma_set.obj[keep],
        rew=gamma_set.rew[keep],
        cost=gamma_set.cost[keep],
    )


def pbvi_solve(
    model: TabularCPomdp,
    obj_table: np.ndarray,
    time_budget: float = 10.0,
    rng: np.random.Generator | None = None,
    n_beliefs: int = 200,
    max_sweeps: int = 2000,
    sweep_tol: float = 1e-9,
) -> PairedAlphaSet:
    """Anytime point-based value iteration maximizing ``obj_table``.

    Sweeps backups over a fixed set of reachable beliefs until the values at
    those beliefs stabilize or the budget runs out; returns best-so-far.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    obj_table = np.asarray(obj_table, dtype=float)
    deadline = time.monotonic() + time_budget
    beliefs = collect_beliefs(model, rng, n_beliefs=n_beliefs)
    gamma_set = blind_paired(model, obj_table)
    values = np.array([gamma_set.value_at(b) for b in beliefs])
    for _ in range(max_sweeps):
        new_rows = [backup_point(model, gamma_set, obj_table, b) for b in beliefs]
        gamma_set = _prune(
            PairedAlphaSet(
                actions=np.concatenate([gamma_set.actions, [r[0] for r in new_rows]]),
                obj=np.vstack([gamma_set.obj] + [r[1] for r in new_rows]),
                rew=np.vstack([gamma_set.rew] + [r[2] for r in new_rows]),
                cost=np.vstack([gamma_set.cost] + [r[3] for r in new_rows]),
            )
        )
        new_values = np.array([gamma_set.value_at(b) for b in beliefs])
        drift = np.abs(new_values - values).max()
        values = new_values
        if drift <= sweep_tol or time.monotonic() >= deadline:
            break
    return gamma_set
