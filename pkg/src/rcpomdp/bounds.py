"""Alpha-vector bound initialization.

Provides the Fast Informed Bound (upper bound on optimal reward, lower bound
on minimum cost), blind stay-with-one-action bounds, the point-based
minimum-cost policy with paired reward/cost vectors, and the LP upper bound
on the worst one-step cost of that policy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySet, NonConvergence
from .lp import lp_solve
from .model import TabularCPomdp

BOUND_TOL = 1e-6
BOUND_MAX_ITERS = 10_000


def alpha_eval(alphas: np.ndarray, b: np.ndarray, mode: str) -> float:
    """Evaluate a piecewise-linear bound at a belief.

    ``max`` mode gives lower reward bounds (best achievable plan in the set);
    ``min`` mode gives upper cost bounds (cheapest plan in the set).
    """
    alphas = np.atleast_2d(alphas)
    if alphas.shape[0] == 0:
        raise EmptySet("alpha set is empty")
    vals = alphas @ b
    return float(vals.max() if mode == "max" else vals.min())


def fib_bound(
    model: TabularCPomdp,
    objective: str = "reward",
    tol: float = BOUND_TOL,
    max_iters: int = BOUND_MAX_ITERS,
    residual_history: list | None = None,
) -> np.ndarray:
    """Fast Informed Bound: one alpha per action, shape (A, S).

    Reward variant upper-bounds the optimal value (evaluate in max mode);
    cost variant lower-bounds the minimum achievable cost (min mode).  The
    recursion mixes per-observation continuations with the best (resp.
    cheapest) follow-up action, giving a bound tighter than QMDP.
    """
    if objective not in ("reward", "cost"):
        raise ValueError(f"unknown objective {objective!r}")
    ns, na, no = model.n_states, model.n_actions, model.n_observations
    table = model.R if objective == "reward" else model.C
    reduce_ = np.max if objective == "reward" else np.min
    # M[a, o][s, s'] = T(s,a,s') Z(s',a,o)
    m_ao = np.empty((na, no, ns, ns))
    for a in range(na):
        for o in range(no):
            m_ao[a, o] = model.T[:, a, :] * model.Z[:, a, o][None, :]

    alphas = np.zeros((na, ns))
    for _ in range(max_iters):
        nxt = np.empty_like(alphas)
        for a in range(na):
            acc = np.zeros(ns)
            for o in range(no):
                # candidate continuation value per next action, then best of them
                cont = m_ao[a, o] @ alphas.T  # (S, A)
                acc += reduce_(cont, axis=1)
            nxt[a] = table[:, a] + model.gamma * acc
        residual = np.abs(nxt - alphas).max()
        alphas = nxt
        if residual_history is not None:
            residual_history.append(residual)
        if residual <= tol:
            if objective == "reward":
                # iterates approach the fixed point from below; pad so the
                # returned set is a true upper bound despite the residual
                alphas = alphas + residual / (1.0 - model.gamma)
            return alphas
    raise NonConvergence(
        f"FIB ({objective}) residual {residual:.3g} > {tol} after {max_iters} iterations"
    )


def blind_lower_bound(model: TabularCPomdp, objective: str = "reward") -> np.ndarray:
    """Stay-with-one-action-forever value vectors, shape (A, S).

    Exact fixed point of the per-action backup (solved linearly, which the
    near-one discounts here require).  Reward variant lower-bounds the optimal
    value in max mode; cost variant upper-bounds the minimum cost in min mode,
    each alpha being the cost of an actual single-action policy.
    """
    if objective not in ("reward", "cost"):
        raise ValueError(f"unknown objective {objective!r}")
    table = model.R if objective == "reward" else model.C
    ns = model.n_states
    eye = np.eye(ns)
    out = np.empty((model.n_actions, ns))
    for a in range(model.n_actions):
        out[a] = np.linalg.solve(eye - model.gamma * model.T[:, a, :], table[:, a])
    return out


@dataclass
class AlphaPairSet:
    """Paired reward/cost value vectors of one policy's conditional plans.

    Each row i is a plan rooted at action ``actions[i]`` whose reward value
    vector is ``alpha_r[i]`` and cost value vector ``alpha_c[i]``.  Selection
    minimizes cost, breaking ties by reward then lowest action index.
    """

    actions: np.ndarray  # (n,)
    alpha_r: np.ndarray  # (n, S)
    alpha_c: np.ndarray  # (n, S)

    def __len__(self) -> int:
        return len(self.actions)

    def select(self, b: np.ndarray, tol: float = 1e-9) -> int:
        costs = self.alpha_c @ b
        cutoff = costs.min() + tol
        rews = self.alpha_r @ b
        best = -1
        for i in range(len(costs)):
            if costs[i] > cutoff:
                continue
            if best < 0 or rews[i] > rews[best] + tol:
                best = i
            elif abs(rews[i] - rews[best]) <= tol and self.actions[i] < self.actions[best]:
                best = i
        return best

    def cost_at(self, b: np.ndarray) -> float:
        return float((self.alpha_c @ b).min())

    def reward_at(self, b: np.ndarray) -> float:
        return float(self.alpha_r[self.select(b)] @ b)

    def action_at(self, b: np.ndarray) -> int:
        return int(self.actions[self.select(b)])

    def to_dict(self) -> dict:
        return {
            "alphas": [
                {
                    "action": int(self.actions[i]),
                    "alpha_r": self.alpha_r[i].tolist(),
                    "alpha_c": self.alpha_c[i].tolist(),
                }
                for i in range(len(self))
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AlphaPairSet":
        rows = data["alphas"]
        return cls(
            actions=np.array([r["action"] for r in rows], dtype=int),
            alpha_r=np.array([r["alpha_r"] for r in rows], dtype=float),
            alpha_c=np.array([r["alpha_c"] for r in rows], dtype=float),
        )


@dataclass
class BoundSet:
    """The four alpha sets bracketing optimal reward and cost values."""

    upper_r: np.ndarray  # FIB reward, max mode
    lower_r: np.ndarray  # blind reward, max mode
    upper_c: np.ndarray  # min-cost policy cost vectors, min mode
    lower_c: np.ndarray  # FIB cost, min mode

    def reward_upper(self, b) -> float:
        return alpha_eval(self.upper_r, b, "max")

    def reward_lower(self, b) -> float:
        return alpha_eval(self.lower_r, b, "max")

    def cost_upper(self, b) -> float:
        return alpha_eval(self.upper_c, b, "min")

    def cost_lower(self, b) -> float:
        return alpha_eval(self.lower_c, b, "min")


def make_bound_set(model: TabularCPomdp, gamma_cmin: AlphaPairSet | None = None) -> BoundSet:
    upper_c = gamma_cmin.alpha_c if gamma_cmin is not None else blind_lower_bound(model, "cost")
    return BoundSet(
        upper_r=fib_bound(model, "reward"),
        lower_r=blind_lower_bound(model, "reward"),
        upper_c=upper_c,
        lower_c=fib_bound(model, "cost"),
    )


def solve_min_cost_policy(
    model: TabularCPomdp,
    time_budget: float = 10.0,
    rng=None,
    n_beliefs: int = 200,
    sweep_tol: float = 1e-9,
) -> AlphaPairSet:
    """Point-based solve of the cost-minimization policy.

    Runs the unconstrained point-based solver on reward ``-C`` while tracking,
    along the same plan choices, the true reward and cost vectors of every
    plan.  Anytime: returns the best set found within the budget.
    """
    from .pointbased import pbvi_solve

    if rng is None:
        rng = np.random.default_rng(0)
    paired = pbvi_solve(
        model,
        obj_table=-model.C,
        time_budget=time_budget,
        rng=rng,
        n_beliefs=n_beliefs,
        sweep_tol=sweep_tol,
    )
    return AlphaPairSet(actions=paired.actions, alpha_r=paired.rew, alpha_c=paired.cost)


def cmax_upper_bound(gamma_cmin: AlphaPairSet) -> float:
    """LP upper bound on the worst one-step cost of the min-cost policy.

    Solves max over beliefs of the cheapest plan's cost:
        max t  s.t.  alpha_c . b >= t for every plan,  sum b = 1,  b >= 0.
    """
    if len(gamma_cmin) == 0:
        raise EmptySet("gamma_cmin is empty")
    ns = gamma_cmin.alpha_c.shape[1]
    n = ns + 1  # belief entries plus t
    c = np.zeros(n)
    c[-1] = 1.0
    a_ub = np.hstack([-gamma_cmin.alpha_c, np.ones((len(gamma_cmin), 1))])
    b_ub = np.zeros(len(gamma_cmin))
    a_eq = np.concatenate([np.ones(ns), [0.0]])[None, :]
    res = lp_solve(c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=[1.0], free=(ns,))
    return max(res.value, 0.0)
