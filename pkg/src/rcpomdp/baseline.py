"""Lagrangian column-generation baseline for expectation-constrained planning.

Alternates scalarized unconstrained solves (reward minus lambda times cost)
with a master LP over the collected deterministic policies.  The master's
dual price on the cost constraint drives the next scalarization.  The
closed-loop variant re-solves from the current belief with the remaining
admissible budget at every execution step.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .arcs import d_update
from .errors import DeadBudget, LPInfeasible
from .lp import lp_solve
from .model import TabularCPomdp
from .pointbased import PairedAlphaSet, pbvi_solve

EVAL_DEPTH = 20
LAMBDA_STALL = 1e-6
VALUE_MATCH_TOL = 1e-4  # alpha prediction vs. policy-graph evaluation


@dataclass
class ColumnValue:
    value_r: float
    value_c: float
    tail_r: float  # truncation bound on unresolved leaves, reward units
    tail_c: float


@dataclass
class PolicyColumn:
    plans: PairedAlphaSet
    value_r: float
    value_c: float

    def to_dict(self) -> dict:
        return {
            "value_r": self.value_r,
            "value_c": self.value_c,
            "plans": {
                "actions": self.plans.actions.tolist(),
                "obj": self.plans.obj.tolist(),
                "rew": self.plans.rew.tolist(),
                "cost": self.plans.cost.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyColumn":
        p = data["plans"]
        plans = PairedAlphaSet(
            actions=np.array(p["actions"], dtype=int),
            obj=np.array(p["obj"], dtype=float),
            rew=np.array(p["rew"], dtype=float),
            cost=np.array(p["cost"], dtype=float),
        )
        return cls(plans=plans, value_r=data["value_r"], value_c=data["value_c"])


@dataclass
class MixedPolicy:
    columns: list
    weights: np.ndarray

    def to_dict(self) -> dict:
        return {
            "type": "cgcp",
            "weights": self.weights.tolist(),
            "columns": [c.to_dict() for c in self.columns],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixedPolicy":
        return cls(
            columns=[PolicyColumn.from_dict(c) for c in data["columns"]],
            weights=np.array(data["weights"], dtype=float),
        )

    def mixture_value(self) -> tuple[float, float]:
        vr = sum(w * c.value_r for w, c in zip(self.weights, self.columns))
        vc = sum(w * c.value_c for w, c in zip(self.weights, self.columns))
        return float(vr), float(vc)


def evaluate_policy_columns(
    model: TabularCPomdp,
    plans: PairedAlphaSet,
    depth: int = EVAL_DEPTH,
    max_nodes: int = 20000,
) -> ColumnValue:
    """Exact policy-graph evaluation of a deterministic alpha-greedy policy.

    Expands the belief graph under the policy, linking back to previously
    visited beliefs, and solves the resulting linear value equations by
    iteration.  Beliefs first reached beyond ``depth`` stay unexpanded; their
    contribution is bounded by the reported discount tails.
    """
    gamma = model.gamma
    terminal = model.terminal_states()
    key_of = lambda b: tuple(np.round(b, 10))

    beliefs = [np.asarray(model.b0, dtype=float)]
    index = {key_of(model.b0): 0}
    first_depth = [0]
    edges = []
    frontier = [0]
    while frontier:
        node = frontier.pop()
        b = beliefs[node]
        if first_depth[node] >= depth or len(beliefs) >= max_nodes:
            continue
        if terminal[int(b.argmax())] and b.max() > 1.0 - 1e-12:
            continue
        a = plans.greedy_action(b)
        pred = b @ model.T[:, a, :]
        probs = pred @ model.Z[:, a, :]
        out = []
        for o in range(model.n_observations):
            if probs[o] <= 1e-12:
                continue
            child_b = pred * model.Z[:, a, o]
            child_b = child_b / child_b.sum()
            key = key_of(child_b)
            if key not in index:
                index[key] = len(beliefs)
                beliefs.append(child_b)
                first_depth.append(first_depth[node] + 1)
                frontier.append(index[key])
            out.append((probs[o], index[key]))
        edges.append((node, float(b @ model.R[:, a]), float(b @ model.C[:, a]), out))

    n = len(beliefs)
    step_r = np.zeros(n)
    step_c = np.zeros(n)
    trans = [[] for _ in range(n)]
    expanded = np.zeros(n, dtype=bool)
    for node, r, c, out in edges:
        step_r[node] = r
        step_c[node] = c
        trans[node] = out
        expanded[node] = True

    v_r = np.zeros(n)
    v_c = np.zeros(n)
    sweeps = max(depth + 5, 1200)
    for _ in range(sweeps):
        new_r = step_r.copy()
        new_c = step_c.copy()
        for i in range(n):
            if not expanded[i]:
                new_r[i] = 0.0
                new_c[i] = 0.0
                continue
            acc_r = acc_c = 0.0
            for p, j in trans[i]:
                acc_r += p * v_r[j]
                acc_c += p * v_c[j]
            new_r[i] += gamma * acc_r
            new_c[i] += gamma * acc_c
        drift = max(np.abs(new_r - v_r).max(), np.abs(new_c - v_c).max())
        v_r, v_c = new_r, new_c
        if drift <= 1e-13:
            break

    unresolved = (~expanded) & ~np.array(
        [terminal[int(b.argmax())] and b.max() > 1 - 1e-12 for b in beliefs]
    )
    if unresolved.any():
        cut = min(first_depth[i] for i in range(n) if unresolved[i])
        tail_scale = gamma**cut / (1.0 - gamma)
    else:
        tail_scale = 0.0
    tail_r = tail_scale * float(np.abs(model.R).max())
    tail_c = tail_scale * float(model.C.max())
    return ColumnValue(value_r=float(v_r[0]), value_c=float(v_c[0]), tail_r=tail_r, tail_c=tail_c)


def _master_lp(columns, c_hat):
    values = np.array([c.value_r for c in columns])
    costs = np.array([c.value_c for c in columns])
    n = len(columns)
    res = lp_solve(
        values,
        a_ub=costs[None, :],
        b_ub=[c_hat],
        a_eq=np.ones((1, n)),
        b_eq=[1.0],
    )
    lam = max(float(res.dual_ub[0]), 0.0)
    return res.x, res.value, lam


@dataclass
class CgcpConfig:
    time_budget: float = 300.0
    max_iterations: int = 100
    tau: float = 20.0  # per-iteration subproblem budget, seconds
    tau_plus: float = 100.0  # added when the dual price stalls
    n_beliefs: int = 200
    seed: int = 11878
    gap_tol: float = 1e-6
    eval_depth: int = EVAL_DEPTH


def solve_cgcp(
    model: TabularCPomdp,
    config: CgcpConfig | None = None,
    history: list | None = None,
) -> MixedPolicy:
    """Column generation against the expectation constraint at the root.

    ``history`` (if given) collects one (master_value, mixture_cost, lam)
    triple per master solve.
    """
    cfg = config or CgcpConfig()
    deadline = time.monotonic() + cfg.time_budget
    rng = np.random.default_rng(cfg.seed)

    def make_column(lam, budget):
        plans = pbvi_solve(
            model,
            obj_table=model.R - lam * model.C,
            time_budget=budget,
            rng=rng,
            n_beliefs=cfg.n_beliefs,
        )
        val = evaluate_policy_columns(model, plans, depth=cfg.eval_depth)
        return PolicyColumn(plans=plans, value_r=val.value_r, value_c=val.value_c), plans

    # seed with the min-cost column so the master is always feasible
    mincost_plans = pbvi_solve(
        model, obj_table=-model.C, time_budget=min(cfg.tau, 10.0), rng=rng, n_beliefs=cfg.n_beliefs
    )
    mc_val = evaluate_policy_columns(model, mincost_plans, depth=cfg.eval_depth)
    columns = [PolicyColumn(mincost_plans, mc_val.value_r, mc_val.value_c)]
    if columns[0].value_c > model.c_hat + 1e-6:
        raise LPInfeasible(
            f"minimum achievable cost {columns[0].value_c:.6g} exceeds budget {model.c_hat:.6g}"
        )

    lam = 0.0
    tau = cfg.tau
    weights = np.array([1.0])
    upper = np.inf
    for _ in range(cfg.max_iterations):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            break
        column, plans = make_column(lam, min(tau, max(remaining, 0.1)))
        sig = (round(column.value_r, 9), round(column.value_c, 9))
        if not any((round(c.value_r, 9), round(c.value_c, 9)) == sig for c in columns):
            columns.append(column)
        weights, master_value, new_lam = _master_lp(columns, model.c_hat)
        if history is not None:
            mix_cost = float(sum(w * c.value_c for w, c in zip(weights, columns)))
            history.append((float(master_value), mix_cost, float(new_lam)))
        upper = min(upper, plans.value_at(model.b0) + lam * model.c_hat)
        if upper - master_value <= cfg.gap_tol * max(1.0, abs(master_value)):
            lam = new_lam
            break
        if abs(new_lam - lam) < LAMBDA_STALL:
            tau += cfg.tau_plus
        lam = new_lam

    keep = weights > 1e-9
    kept_cols = [c for c, k in zip(columns, keep) if k]
    kept_w = weights[keep]
    kept_w = kept_w / kept_w.sum()
    return MixedPolicy(columns=kept_cols, weights=kept_w)


def solve_cgcp_closed_loop(model: TabularCPomdp, per_step_budget: float = 5.0,
                           config: CgcpConfig | None = None):
    """Factory for a per-step re-planning callable (belief, d, rng) -> action.

    Re-solves the expectation-constrained problem from the current belief with
    the remaining admissible budget, then samples a column.  A negative budget
    falls back to the minimum-cost column.
    """
    base_cfg = config or CgcpConfig()
    mincost_plans = pbvi_solve(
        model,
        obj_table=-model.C,
        time_budget=min(per_step_budget, 2.0),
        rng=np.random.default_rng(base_cfg.seed),
        n_beliefs=base_cfg.n_beliefs,
    )

    def act(belief, d, rng) -> int:
        if d < -1e-9:
            # DeadBudget: no admissible budget remains; fail gracefully
            return mincost_plans.greedy_action(belief)
        sub = dataclasses.replace(model, b0=np.asarray(belief, dtype=float), c_hat=max(d, 0.0))
        cfg = dataclasses.replace(base_cfg, time_budget=per_step_budget,
                                  tau=max(per_step_budget / 4, 0.2))
        mixed = solve_cgcp(sub, cfg)
        idx = rng.choice(len(mixed.weights), p=mixed.weights / mixed.weights.sum())
        return mixed.columns[idx].plans.greedy_action(belief)

    return act
