"""Benchmark environment constructors.

Four tabular constrained POMDPs: the two-tunnel counterexample (ce), the
costed Tiger problem (ctiger), constrained RockSample (crs), and the
hall-with-three-tunnels rover problem (tunnels).  Every constructor returns a
validated TabularCPomdp; parameters are exposed so the documented variants in
each problem family can be reproduced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams
from .model import TabularCPomdp

CE_GAMMA = 1.0 - math.exp(-14.0)


def make_ce(obs_accuracy: float = 0.8, c_hat: float = 5.0, gamma: float = CE_GAMMA) -> TabularCPomdp:
    """Two-tunnel counterexample with a commit/circumvent choice.

    States s1/s2 encode which tunnel is rocky before scouting; scouting (a_A)
    moves them to s3/s4 and emits a noisy terrain observation; a_B always
    circumvents into the terminal s5 for a flat cost of 5.  Committing to
    tunnel one (a_A at s3/s4) pays 12 reward and costs 10 exactly when that
    tunnel is rocky.
    """
    if not (0.5 <= obs_accuracy <= 1.0):
        raise InvalidParams(f"obs_accuracy must lie in [0.5, 1], got {obs_accuracy}")
    states = ("s1", "s2", "s3", "s4", "s5")
    actions = ("a_A", "a_B")
    observations = ("rocky", "not_rocky")
    ns, na, no = 5, 2, 2
    T = np.zeros((ns, na, ns))
    a_a, a_b = 0, 1
    s1, s2, s3, s4, s5 = range(5)
    T[s1, a_a, s3] = 1.0
    T[s2, a_a, s4] = 1.0
    T[s1, a_b, s5] = 1.0
    T[s2, a_b, s5] = 1.0
    for s in (s3, s4, s5):
        T[s, :, s5] = 1.0

    Z = np.full((ns, na, no), 0.5)
    Z[s3, a_a] = (obs_accuracy, 1.0 - obs_accuracy)
    Z[s4, a_a] = (1.0 - obs_accuracy, obs_accuracy)

    R = np.zeros((ns, na))
    R[s1, a_b] = R[s2, a_b] = 10.0
    R[s3, a_a] = R[s4, a_a] = 12.0

    C = np.zeros((ns, na))
    C[s1, a_b] = C[s2, a_b] = 5.0
    C[s3, a_a] = 10.0
    C[s3, a_b] = C[s4, a_b] = 5.0

    b0 = np.array([0.5, 0.5, 0.0, 0.0, 0.0])
    return TabularCPomdp(states, actions, observations, T, Z, R, C, gamma, b0, c_hat)


def make_ctiger(c_hat: float = 3.0, listen_accuracy: float = 0.85, gamma: float = 0.95) -> TabularCPomdp:
    """Two-door Tiger with the canonical -100/+10/-1 payoffs and a listen cost of 1."""
    if c_hat < 0:
        raise InvalidParams(f"c_hat must be non-negative, got {c_hat}")
    states = ("tiger_left", "tiger_right")
    actions = ("listen", "open_left", "open_right")
    observations = ("hear_left", "hear_right")
    ns, na, no = 2, 3, 2
    listen, open_l, open_r = 0, 1, 2
    tl, tr = 0, 1

    T = np.zeros((ns, na, ns))
    T[:, listen] = np.eye(ns)
    T[:, open_l] = 0.5  # opening resets the problem
    T[:, open_r] = 0.5

    Z = np.full((ns, na, no), 0.5)
    Z[tl, listen] = (listen_accuracy, 1.0 - listen_accuracy)
    Z[tr, listen] = (1.0 - listen_accuracy, listen_accuracy)

    R = np.zeros((ns, na))
    R[:, listen] = -1.0
    R[tl, open_l] = -100.0
    R[tr, open_l] = 10.0
    R[tl, open_r] = 10.0
    R[tr, open_r] = -100.0

    C = np.zeros((ns, na))
    C[:, listen] = 1.0

    b0 = np.array([0.5, 0.5])
    return TabularCPomdp(states, actions, observations, T, Z, R, C, gamma, b0, c_hat)


def make_crs(
    grid_n: int = 4,
    num_rocks: int = 4,
    seed: int = 11878,
    c_hat: float = 1.0,
    gamma: float = 0.95,
    sensor_halfdist: float = 20.0,
) -> TabularCPomdp:
    """Constrained RockSample on an n-by-n grid with seeded rock placement.

    Standard dynamics: deterministic moves, exit east for +10, sampling a good
    rock +10 (the rock turns bad), sampling anything else -10, and a
    distance-decaying check sensor per rock.  Sampling a bad rock costs 1;
    everything else is free.
    """
    if grid_n < 2 or num_rocks < 1:
        raise InvalidParams(f"need grid_n >= 2 and num_rocks >= 1, got ({grid_n}, {num_rocks})")
    if num_rocks > grid_n * grid_n:
        raise InvalidParams("more rocks than grid cells")
    rng = np.random.default_rng(seed)
    cells = [(x, y) for x in range(grid_n) for y in range(grid_n)]
    rock_cells = [cells[i] for i in rng.choice(len(cells), size=num_rocks, replace=False)]
    rock_at = {cell: i for i, cell in enumerate(rock_cells)}

    n_pos = grid_n * grid_n
    n_mask = 1 << num_rocks
    ns = n_pos * n_mask + 1
    terminal = ns - 1
    move_names = ("north", "south", "east", "west")
    actions = move_names + ("sample",) + tuple(f"check_{i}" for i in range(num_rocks))
    na = len(actions)
    observations = ("good", "bad", "none")
    o_good, o_bad, o_none = 0, 1, 2
    start = (0, grid_n // 2)

    def pos_idx(x, y):
        return x * grid_n + y

    def state_idx(x, y, mask):
        return pos_idx(x, y) * n_mask + mask

    moves = {"north": (0, 1), "south": (0, -1), "east": (1, 0), "west": (-1, 0)}

    T = np.zeros((ns, na, ns))
    Z = np.zeros((ns, na, 3))
    R = np.zeros((ns, na))
    C = np.zeros((ns, na))
    Z[:, :, o_none] = 1.0  # default: uninformative
    T[terminal, :, terminal] = 1.0

    for x in range(grid_n):
        for y in range(grid_n):
            cell = (x, y)
            for mask in range(n_mask):
                s = state_idx(x, y, mask)
                for a, name in enumerate(move_names):
                    dx, dy = moves[name]
                    nx, ny = x + dx, y + dy
                    if name == "east" and nx == grid_n:
                        T[s, a, terminal] = 1.0
                        R[s, a] = 10.0
                    elif 0 <= nx < grid_n and 0 <= ny < grid_n:
                        T[s, a, state_idx(nx, ny, mask)] = 1.0
                    else:
                        T[s, a, s] = 1.0
                a_sample = len(move_names)
                if cell in rock_at:
                    bit = 1 << rock_at[cell]
                    if mask & bit:
                        R[s, a_sample] = 10.0
                        T[s, a_sample, state_idx(x, y, mask & ~bit)] = 1.0
                    else:
                        R[s, a_sample] = -10.0
                        C[s, a_sample] = 1.0
                        T[s, a_sample, s] = 1.0
                else:
                    R[s, a_sample] = -10.0
                    T[s, a_sample, s] = 1.0
                for i, rc in enumerate(rock_cells):
                    a_check = a_sample + 1 + i
                    T[s, a_check, s] = 1.0
                    dist = math.dist(cell, rc)
                    acc = 0.5 * (1.0 + 2.0 ** (-dist / sensor_halfdist))
                    good = bool(mask & (1 << i))
                    Z[s, a_check, o_good] = acc if good else 1.0 - acc
                    Z[s, a_check, o_bad] = 1.0 - acc if good else acc
                    Z[s, a_check, o_none] = 0.0

    b0 = np.zeros(ns)
    b0[state_idx(*start, 0) : state_idx(*start, n_mask - 1) + 1] = 1.0 / n_mask
    return TabularCPomdp(
        tuple(f"s{i}" for i in range(ns)),
        actions,
        observations,
        T,
        Z,
        R,
        C,
        gamma,
        b0,
        c_hat,
    )


def make_tunnels(
    p_obs_correct: float = 0.8,
    rock_probs: tuple = (0.6, 0.4, 0.0),
    backtrack_cost: float = 0.5,
    c_hat: float = 1.0,
    gamma: float = 0.95,
    tunnel_len: int = 5,
) -> TabularCPomdp:
    """Hall branching into three corridors with rewards 2.0/1.5/0.5 at the ends.

    Rocks, when present, occupy the last two cells of tunnels one and two; each
    rocky cell entered costs 1.  Moving backwards costs ``backtrack_cost``.
    Observations are a constant-accuracy rock indicator while inside tunnels
    one or two.
    """
    if not (0.5 <= p_obs_correct <= 1.0):
        raise InvalidParams(f"p_obs_correct must lie in [0.5, 1], got {p_obs_correct}")
    if len(rock_probs) != 3 or any(not 0.0 <= p <= 1.0 for p in rock_probs):
        raise InvalidParams(f"rock_probs must be three probabilities, got {rock_probs}")
    if rock_probs[2] != 0.0:
        raise InvalidParams("tunnel three is always rock-free")
    if backtrack_cost < 0 or tunnel_len < 3:
        raise InvalidParams("backtrack_cost must be >= 0 and tunnel_len >= 3")

    L = tunnel_len
    rewards = (2.0, 1.5, 0.5)
    n_pos = 1 + 3 * L + 1  # hall, tunnel cells, terminal
    hall, terminal = 0, n_pos - 1
    n_cfg = 4  # bit 0: tunnel-1 rocky, bit 1: tunnel-2 rocky
    ns = n_pos * n_cfg
    actions = ("advance_1", "advance_2", "advance_3", "back")
    na = 4
    observations = ("rocky", "clear", "none")
    o_rocky, o_clear, o_none = 0, 1, 2

    def pos_of(tunnel, cell):  # cell in 1..L
        return 1 + tunnel * L + (cell - 1)

    def tunnel_cell(pos):
        if pos in (hall, terminal):
            return None, None
        t, c = divmod(pos - 1, L)
        return t, c + 1

    def rocky(cfg, tunnel, cell):
        return tunnel in (0, 1) and cell in (L - 1, L) and bool(cfg & (1 << tunnel))

    T = np.zeros((ns, na, ns))
    Z = np.zeros((ns, na, 3))
    R = np.zeros((ns, na))
    C = np.zeros((ns, na))

    def sidx(pos, cfg):
        return pos * n_cfg + cfg

    for cfg in range(n_cfg):
        for pos in range(n_pos):
            s = sidx(pos, cfg)
            t, c = tunnel_cell(pos)
            for a in range(na):
                if pos == terminal:
                    T[s, a, s] = 1.0
                    continue
                if a < 3:  # advance toward tunnel a's end
                    if pos == hall:
                        dest = pos_of(a, 1)
                    elif t == a:
                        dest = pos_of(a, c + 1) if c < L else terminal
                        if c == L:
                            R[s, a] = rewards[a]
                    else:
                        dest = pos  # wrong-tunnel advance is a no-op
                    T[s, a, sidx(dest, cfg)] = 1.0
                    dt, dc = tunnel_cell(dest)
                    if dest != pos and dt is not None and rocky(cfg, dt, dc):
                        C[s, a] = 1.0  # charged on entering a rocky cell
                else:  # back
                    if pos == hall:
                        dest = hall
                    elif c == 1:
                        dest = hall
                        C[s, a] = backtrack_cost
                    else:
                        dest = pos_of(t, c - 1)
                        C[s, a] = backtrack_cost
                        if rocky(cfg, t, c - 1):
                            C[s, a] += 1.0
                    T[s, a, sidx(dest, cfg)] = 1.0

    # noisy rock indicator when advancing within tunnels one and two;
    # staying put or backing up yields nothing (no free re-sampling)
    for cfg in range(n_cfg):
        for pos in range(n_pos):
            sp = sidx(pos, cfg)
            t, c = tunnel_cell(pos)
            Z[sp, :, o_none] = 1.0
            if t in (0, 1):
                has_rocks = bool(cfg & (1 << t))
                p_rocky = p_obs_correct if has_rocks else 1.0 - p_obs_correct
                Z[sp, t, o_rocky] = p_rocky
                Z[sp, t, o_clear] = 1.0 - p_rocky
                Z[sp, t, o_none] = 0.0

    b0 = np.zeros(ns)
    p1, p2 = rock_probs[0], rock_probs[1]
    for cfg in range(n_cfg):
        w1 = p1 if cfg & 1 else 1.0 - p1
        w2 = p2 if cfg & 2 else 1.0 - p2
        b0[sidx(hall, cfg)] = w1 * w2
    return TabularCPomdp(
        tuple(f"s{i}" for i in range(ns)),
        actions,
        observations,
        T,
        Z,
        R,
        C,
        gamma,
        b0,
        c_hat,
    )


_CONSTRUCTORS = {
    "ce": make_ce,
    "ctiger": make_ctiger,
    "crs": make_crs,
    "tunnels": make_tunnels,
}


@dataclass
class EnvSpec:
    """Named benchmark plus keyword parameter overrides."""

    name: str
    parameters: dict = field(default_factory=dict)

    def build(self) -> TabularCPomdp:
        if self.name not in _CONSTRUCTORS:
            raise InvalidParams(
                f"unknown environment {self.name!r}; choose from {sorted(_CONSTRUCTORS)}"
            )
        ctor = _CONSTRUCTORS[self.name]
        try:
            return ctor(**self.parameters)
        except TypeError as exc:
            raise InvalidParams(f"bad parameters for {self.name}: {exc}") from exc


def make_env(name: str, **parameters) -> TabularCPomdp:
    return EnvSpec(name, parameters).build()
