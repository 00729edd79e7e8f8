"""Tabular constrained-POMDP data model, belief arithmetic, and model file I/O.

A model is a finite (S, A, O) tuple with dense numpy tables:

    T[s, a, s']  transition probabilities
    Z[s', a, o]  observation probabilities (conditioned on the *arrival* state)
    R[s, a]      rewards
    C[s, a]      non-negative costs

plus a discount ``gamma``, an initial belief ``b0`` and a scalar cost budget
``c_hat``.  All operations are pure functions of the (immutable) model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError, StochasticityError, ZeroProbabilityObservation

ROW_SUM_TOL = 1e-9
OBS_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class TabularCPomdp:
    states: tuple[str, ...]
    actions: tuple[str, ...]
    observations: tuple[str, ...]
    T: np.ndarray  # (S, A, S)
    Z: np.ndarray  # (S, A, O)
    R: np.ndarray  # (S, A)
    C: np.ndarray  # (S, A)
    gamma: float
    b0: np.ndarray  # (S,)
    c_hat: float

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    def __post_init__(self):
        for name in ("T", "Z", "R", "C", "b0"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.validate()

    def validate(self):
        ns, na, no = self.n_states, self.n_actions, self.n_observations
        if self.T.shape != (ns, na, ns):
            raise SchemaError("T", f"expected shape {(ns, na, ns)}, got {self.T.shape}")
        if self.Z.shape != (ns, na, no):
            raise SchemaError("Z", f"expected shape {(ns, na, no)}, got {self.Z.shape}")
        if self.R.shape != (ns, na):
            raise SchemaError("R", f"expected shape {(ns, na)}, got {self.R.shape}")
        if self.C.shape != (ns, na):
            raise SchemaError("C", f"expected shape {(ns, na)}, got {self.C.shape}")
        if self.b0.shape != (ns,):
            raise SchemaError("b0", f"expected shape {(ns,)}, got {self.b0.shape}")
        t_sums = self.T.sum(axis=2)
        bad = np.argwhere(np.abs(t_sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            s, a = bad[0]
            raise StochasticityError(
                f"T[{s},{a},:] sums to {t_sums[s, a]:.12g}, expected 1 within {ROW_SUM_TOL}"
            )
        z_sums = self.Z.sum(axis=2)
        bad = np.argwhere(np.abs(z_sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            sp, a = bad[0]
            raise StochasticityError(
                f"Z[{sp},{a},:] sums to {z_sums[sp, a]:.12g}, expected 1 within {ROW_SUM_TOL}"
            )
        if np.any(self.T < -ROW_SUM_TOL) or np.any(self.Z < -ROW_SUM_TOL):
            raise StochasticityError("negative probability entry in T or Z")
        if np.any(self.C < 0):
            raise SchemaError("C", "costs must be non-negative")
        if not (0.0 <= self.gamma < 1.0):
            raise SchemaError("gamma", f"discount must lie in [0, 1), got {self.gamma}")
        if self.c_hat < 0:
            raise SchemaError("c_hat", f"budget must be non-negative, got {self.c_hat}")
        if np.any(self.b0 < 0) or abs(self.b0.sum() - 1.0) > ROW_SUM_TOL:
            raise StochasticityError(f"b0 sums to {self.b0.sum():.12g}")

    def action_index(self, action) -> int:
        return action if isinstance(action, (int, np.integer)) else self.actions.index(action)

    def observation_index(self, obs) -> int:
        return obs if isinstance(obs, (int, np.integer)) else self.observations.index(obs)

    def terminal_states(self) -> np.ndarray:
        """Boolean mask of absorbing states with zero reward and zero cost under every action."""
        ns = self.n_states
        self_loop = np.array(
            [all(self.T[s, a, s] == 1.0 for a in range(self.n_actions)) for s in range(ns)]
        )
        inert = (self.R == 0).all(axis=1) & (self.C == 0).all(axis=1)
        return self_loop & inert


@dataclass(frozen=True)
class History:
    """Ordered (action, observation) index pairs; empty at t = 0."""

    steps: tuple[tuple[int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def extend(self, action: int, observation: int) -> "History":
        return History(self.steps + ((action, observation),))


def make_belief(p, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate and return a belief vector (non-negative, sums to one)."""
    b = np.asarray(p, dtype=float)
    if np.any(b < -tol) or abs(b.sum() - 1.0) > tol:
        raise StochasticityError(f"belief sums to {b.sum():.12g} or has negative entries")
    return np.clip(b, 0.0, None)


def predicted_state_dist(model: TabularCPomdp, b: np.ndarray, a: int) -> np.ndarray:
    """P(s' | b, a) before conditioning on an observation."""
    return b @ model.T[:, a, :]


def observation_prob(model: TabularCPomdp, b: np.ndarray, a, o) -> float:
    """P(o | b, a), the normalizer of the Bayes update."""
    a = model.action_index(a)
    o = model.observation_index(o)
    return float(predicted_state_dist(model, b, a) @ model.Z[:, a, o])


def belief_update(model: TabularCPomdp, b: np.ndarray, a, o) -> np.ndarray:
    """Bayes posterior over arrival states after taking ``a`` and observing ``o``.

    Raises ZeroProbabilityObservation when the normalizer is at or below the
    floor; an impossible observation is an error, never a uniform reset.
    """
    a = model.action_index(a)
    o = model.observation_index(o)
    joint = predicted_state_dist(model, b, a) * model.Z[:, a, o]
    norm = joint.sum()
    if norm <= OBS_PROB_FLOOR:
        raise ZeroProbabilityObservation(
            f"P(o={model.observations[o]} | b, a={model.actions[a]}) = {norm:.3g}"
        )
    # renormalize every update to suppress drift over long rollouts
    return joint / norm


def expected_reward(model: TabularCPomdp, b: np.ndarray, a) -> float:
    return float(b @ model.R[:, model.action_index(a)])


def expected_cost(model: TabularCPomdp, b: np.ndarray, a) -> float:
    return float(b @ model.C[:, model.action_index(a)])


def cumulative_cost_W(model: TabularCPomdp, b0: np.ndarray, h: History) -> float:
    """Discounted expected cost accumulated along a history, replaying beliefs.

    Returns sum over tau < len(h) of gamma^tau * E_{s ~ b_tau}[C(s, a_tau)].
    """
    total = 0.0
    b = np.asarray(b0, dtype=float)
    scale = 1.0
    for a, o in h.steps:
        total += scale * expected_cost(model, b, a)
        b = belief_update(model, b, a, o)
        scale *= model.gamma
    return total


# --- JSON model files -------------------------------------------------------

_SCHEMA_FIELDS = {
    "states": list,
    "actions": list,
    "observations": list,
    "T": list,
    "Z": list,
    "R": list,
    "C": list,
    "gamma": (int, float),
    "b0": list,
    "c_hat": (int, float),
}


def model_to_dict(model: TabularCPomdp) -> dict:
    return {
        "states": list(model.states),
        "actions": list(model.actions),
        "observations": list(model.observations),
        "T": model.T.tolist(),
        "Z": model.Z.tolist(),
        "R": model.R.tolist(),
        "C": model.C.tolist(),
        "gamma": model.gamma,
        "b0": model.b0.tolist(),
        "c_hat": model.c_hat,
    }


def model_from_dict(data: dict) -> TabularCPomdp:
    if not isinstance(data, dict):
        raise SchemaError("$", f"expected a JSON object, got {type(data).__name__}")
    for key, typ in _SCHEMA_FIELDS.items():
        if key not in data:
            raise SchemaError(key, "missing required field")
        if not isinstance(data[key], typ):
            raise SchemaError(key, f"expected {typ}, got {type(data[key]).__name__}")
    try:
        return TabularCPomdp(
            states=tuple(str(s) for s in data["states"]),
            actions=tuple(str(a) for a in data["actions"]),
            observations=tuple(str(o) for o in data["observations"]),
            T=np.array(data["T"], dtype=float),
            Z=np.array(data["Z"], dtype=float),
            R=np.array(data["R"], dtype=float),
            C=np.array(data["C"], dtype=float),
            gamma=float(data["gamma"]),
            b0=np.array(data["b0"], dtype=float),
            c_hat=float(data["c_hat"]),
        )
    except ValueError as exc:  # ragged nested arrays
        raise SchemaError("$", f"malformed table: {exc}") from exc


def save_model(model: TabularCPomdp, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> TabularCPomdp:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return model_from_dict(data)
