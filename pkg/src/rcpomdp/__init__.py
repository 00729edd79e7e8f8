"""Tabular solvers for recursively-constrained POMDPs."""

from .arcs import ArcsConfig, ArcsResult, admissible_horizon, d_update, execute_action, solve
from .baseline import CgcpConfig, MixedPolicy, PolicyColumn, evaluate_policy_columns, solve_cgcp
from .bounds import (
    AlphaPairSet,
    BoundSet,
    alpha_eval,
    blind_lower_bound,
    cmax_upper_bound,
    fib_bound,
    make_bound_set,
    solve_min_cost_policy,
)
from .envs import EnvSpec, make_ce, make_crs, make_ctiger, make_env, make_tunnels
from .lp import LPResult, lp_solve
from .model import (
    History,
    TabularCPomdp,
    belief_update,
    cumulative_cost_W,
    expected_cost,
    expected_reward,
    load_model,
    observation_prob,
    save_model,
)
from .sim import AggregateMetrics, RunMetrics, evaluate, rollout

__all__ = [
    "AggregateMetrics",
    "AlphaPairSet",
    "ArcsConfig",
    "ArcsResult",
    "BoundSet",
    "CgcpConfig",
    "EnvSpec",
    "History",
    "LPResult",
    "MixedPolicy",
    "PolicyColumn",
    "RunMetrics",
    "TabularCPomdp",
    "admissible_horizon",
    "alpha_eval",
    "belief_update",
    "blind_lower_bound",
    "cmax_upper_bound",
    "cumulative_cost_W",
    "d_update",
    "evaluate",
    "evaluate_policy_columns",
    "execute_action",
    "expected_cost",
    "expected_reward",
    "fib_bound",
    "load_model",
    "make_bound_set",
    "make_ce",
    "make_crs",
    "make_ctiger",
    "make_env",
    "make_tunnels",
    "observation_prob",
    "rollout",
    "save_model",
    "solve",
    "solve_cgcp",
    "solve_min_cost_policy",
]
