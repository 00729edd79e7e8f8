"""Anytime recursively-constrained search over (belief, admissible-cost) nodes.

The solver grows a policy tree rooted at (b0, c_hat).  Each node carries
upper/lower bounds on reward and cost per action, the remaining admissible
cost ``d`` (updated exactly along the tree), and a certified admissible
horizon ``k``.  Leaves default to the precomputed minimum-cost policy, whose
worst one-step cost bounds the horizon each leaf can guarantee.

The loop alternates SAMPLE (heuristic gap-driven descent or random descent
toward uncertified branches), BACKUP (bound and certificate recomputation up
the visited path), and PRUNE (inadmissible and dominated action removal).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import AlphaPairSet, cmax_upper_bound, fib_bound, solve_min_cost_policy
from .model import TabularCPomdp, belief_update

TOL = 1e-6
INF = math.inf


def d_update(d: float, step_cost: float, gamma: float) -> float:
    """Remaining admissible cost after paying an expected step cost."""
    return (d - step_cost) / gamma


def admissible_horizon(d: float, c_max: float, gamma: float):
    """Steps the min-cost policy can guarantee within budget d.

    Worst case it pays c_max per step; the largest k with
    c_max * (1 - gamma^k) / (1 - gamma) <= d.  Infinite when the policy is
    free or d covers the whole discounted stream; zero when d is negative.
    """
    if d < 0:
        return 0
    if c_max == 0 or c_max <= d * (1.0 - gamma) + 1e-9:
        return INF
    return int(math.floor(math.log(1.0 - (d / c_max) * (1.0 - gamma)) / math.log(gamma)))


@dataclass
class ActionStat:
    """Per-action bookkeeping at a tree node."""

    exp_reward: float
    exp_cost: float
    d_child: float
    probs: np.ndarray  # (O,) observation probabilities
    leaf_vals: np.ndarray  # (O, 4) virtual-leaf [v_ur, v_lr, v_uc, v_lc]
    leaf_k: list  # (O,) virtual-leaf horizon certificates
    children: list  # (O,) TreeNode | None
    q_upper_r: float = 0.0
    q_lower_r: float = 0.0
    q_upper_c: float = 0.0
    q_lower_c: float = 0.0
    k: float = 0
    pruned: bool = False
    # prune-rule components, recomputed from current bounds each pass
    p_cost: bool = False  # cost lower bound exceeds d
    p_child: bool = False  # some expanded child node is pruned
    p_rival: bool = False  # dominated by a certified rival
    p_horizon: bool = False  # cannot certify the needed horizon, a rival can


class TreeNode:
    __slots__ = (
        "belief",
        "d",
        "depth",
        "k",
        "stats",
        "v_upper_r",
        "v_lower_r",
        "v_upper_c",
        "v_lower_c",
        "selected_action",
        "dead",
        "pruned",
        "parent",
        "node_id",
    )

    def __init__(self, belief, d, depth, parent, node_id):
        self.belief = belief
        self.d = d
        self.depth = depth
        self.parent = parent  # (node, action, obs) or None
        self.node_id = node_id
        self.k = 0
        self.stats: list[ActionStat] = []
        self.v_upper_r = 0.0
        self.v_lower_r = 0.0
        self.v_upper_c = 0.0
        self.v_lower_c = 0.0
        self.selected_action = None
        self.dead = False
        self.pruned = False


@dataclass
class ArcsConfig:
    k_target: float = INF
    epsilon: float = 0.01
    time_budget: float = 60.0
    max_iterations: int | None = None
    kappa: float = 0.5
    heuristic_prob: float = 0.5
    seed: int = 11878
    mincost_budget_frac: float = 0.1
    beta: float = 1e-6  # near-zero cost treated as zero for leaf certificates
    max_depth: int = 400
    stall_limit: int = 2000  # consecutive no-growth samples before giving up
    check_monotone: bool = True


class PolicyTree:
    """Search tree plus the shared bound context."""

    def __init__(self, model: TabularCPomdp, gamma_cmin: AlphaPairSet, config: ArcsConfig,
                 fib_r=None, fib_c=None, c_max=None):
        self.model = model
        self.gamma_cmin = gamma_cmin
        self.config = config
        self.fib_r = fib_bound(model, "reward") if fib_r is None else fib_r
        self.fib_c = fib_bound(model, "cost") if fib_c is None else fib_c
        self.c_max = cmax_upper_bound(gamma_cmin) if c_max is None else c_max
        self.rng = np.random.default_rng(config.seed)
        self.nodes: list[TreeNode] = []
        self.root = self._make_node(model.b0, model.c_hat, 0, None)
        _refresh(self, self.root)

    # -- node construction ---------------------------------------------------

    def _leaf_bounds(self, belief) -> np.ndarray:
        return np.array(
            [
                (self.fib_r @ belief).max(),
                self.gamma_cmin.reward_at(belief),
                self.gamma_cmin.cost_at(belief),
                (self.fib_c @ belief).min(),
            ]
        )

    def leaf_horizon(self, belief, d, cost_upper=None) -> float:
        """Theorem-style certificate for a leaf that follows the min-cost policy."""
        if d < -TOL:
            return 0
        if cost_upper is None:
            cost_upper = self.gamma_cmin.cost_at(belief)
        if cost_upper <= self.config.beta:
            return INF
        return admissible_horizon(max(d, 0.0), self.c_max, self.model.gamma)

    def _make_node(self, belief, d, depth, parent) -> TreeNode:
        model = self.model
        node = TreeNode(belief, d, depth, parent, len(self.nodes))
        node.k = self.leaf_horizon(belief, d)
        no = model.n_observations
        for a in range(model.n_actions):
            exp_reward = float(belief @ model.R[:, a])
            exp_cost = float(belief @ model.C[:, a])
            d_child = d_update(d, exp_cost, model.gamma)
            pred = belief @ model.T[:, a, :]
            probs = pred @ model.Z[:, a, :]
            leaf_vals = np.zeros((no, 4))
            leaf_k = [INF] * no
            for o in range(no):
                if probs[o] <= 1e-12:
                    continue
                child_b = pred * model.Z[:, a, o]
                child_b = child_b / child_b.sum()
                leaf_vals[o] = self._leaf_bounds(child_b)
                leaf_k[o] = self.leaf_horizon(child_b, d_child, cost_upper=leaf_vals[o][2])
            node.stats.append(
                ActionStat(
                    exp_reward=exp_reward,
                    exp_cost=exp_cost,
                    d_child=d_child,
                    probs=probs,
                    leaf_vals=leaf_vals,
                    leaf_k=leaf_k,
                    children=[None] * no,
                )
            )
        self.nodes.append(node)
        return node

    def expand(self, node: TreeNode, a: int, o: int) -> TreeNode:
        stat = node.stats[a]
        child_b = belief_update(self.model, node.belief, a, o)
        child = self._make_node(child_b, stat.d_child, node.depth + 1, (node, a, o))
        stat.children[o] = child
        _refresh(self, child)
        return child

    def k_needed(self, depth: int) -> float:
        return self.config.k_target - depth if self.config.k_target != INF else INF

    def gap(self) -> float:
        return self.root.v_upper_r - self.root.v_lower_r


# -- backup / prune ----------------------------------------------------------


def _child_bounds(stat: ActionStat, o: int):
    child = stat.children[o]
    if child is not None:
        return child.v_upper_r, child.v_lower_r, child.v_upper_c, child.v_lower_c
    return tuple(stat.leaf_vals[o])


def _child_k(stat: ActionStat, o: int):
    child = stat.children[o]
    return child.k if child is not None else stat.leaf_k[o]


def _recompute_q(tree: PolicyTree, node: TreeNode):
    gamma = tree.model.gamma
    for stat in node.stats:
        ur = lr = uc = lc = 0.0
        k = INF
        for o, p in enumerate(stat.probs):
            if p <= 1e-12:
                continue
            c_ur, c_lr, c_uc, c_lc = _child_bounds(stat, o)
            ur += p * c_ur
            lr += p * c_lr
            uc += p * c_uc
            lc += p * c_lc
            k = min(k, _child_k(stat, o))
        stat.q_upper_r = stat.exp_reward + gamma * ur
        stat.q_lower_r = stat.exp_reward + gamma * lr
        stat.q_upper_c = stat.exp_cost + gamma * uc
        stat.q_lower_c = stat.exp_cost + gamma * lc
        stat.k = k


def _branch_certified(stat: ActionStat) -> bool:
    """Every observation branch can be continued within its own budget."""
    return all(
        _child_bounds(stat, o)[2] <= stat.d_child + TOL
        for o, p in enumerate(stat.probs)
        if p > 1e-12
    )


def _update_flags(tree: PolicyTree, node: TreeNode):
    """Recompute the prune flags from current bounds (soft: flags may lift
    as certificates improve, except cost/child prunes which are monotone)."""
    d = node.d
    k_need = tree.k_needed(node.depth)
    stats = node.stats
    for stat in stats:
        stat.p_cost = stat.q_lower_c > d + TOL
        stat.p_child = any(c is not None and c.pruned for c in stat.children)
    eligible = [s for s in stats if not (s.p_cost or s.p_child)]
    certified_rival = any(s.k >= k_need for s in eligible)
    for stat in stats:
        rivals = [
            s
            for s in eligible
            if s is not stat
            and _branch_certified(s)
            and s.k >= k_need
            and stat.k < s.k
            and stat.q_upper_r < s.q_lower_r
            and s.q_upper_c < d
        ]
        stat.p_rival = bool(rivals)
        stat.p_horizon = stat.k < k_need and certified_rival
        stat.pruned = stat.p_cost or stat.p_child or stat.p_rival or stat.p_horizon


def _select_and_value(tree: PolicyTree, node: TreeNode):
    """Value selection per the recursively-constrained backup.

    The lower reward bound comes from the best action whose continuation is
    certified within budget at every observation branch; the upper bound from
    any action not yet proven inadmissible.  Nodes with no candidate fall
    back to the min-cost continuation, which is exactly what their parents
    assumed before expansion.
    """
    stats = node.stats
    d = node.d

    unpruned = [a for a, s in enumerate(stats) if not s.pruned]
    pool = [a for a in unpruned if _branch_certified(stats[a])]
    if pool:
        best = max(pool, key=lambda a: (stats[a].q_lower_r, -a))
        node.selected_action = best
        node.v_lower_r = stats[best].q_lower_r
        node.v_upper_c = stats[best].q_upper_c
    else:
        node.selected_action = None
        node.v_lower_r = tree.gamma_cmin.reward_at(node.belief)
        node.v_upper_c = tree.gamma_cmin.cost_at(node.belief)

    node.v_lower_c = min(s.q_lower_c for s in stats)
    upper_pool = [s for s in stats if not (s.p_cost or s.p_child or s.p_rival)]
    if upper_pool:
        node.v_upper_r = max(max(s.q_upper_r for s in upper_pool), node.v_lower_r)
    else:
        node.v_upper_r = node.v_lower_r

    node.dead = node.dead or all(s.p_cost for s in stats)
    if node.dead or all(s.pruned for s in stats) or node.v_lower_c > d + TOL:
        node.pruned = True
    if node.pruned:
        node.k = 0
        node.selected_action = None if node.dead else node.selected_action
        return
    node.k = min(stats[a].k for a in unpruned)
    if node.selected_action is None:
        # execution falls back to the min-cost policy here
        node.k = min(node.k, tree.leaf_horizon(node.belief, d))


def _refresh(tree: PolicyTree, node: TreeNode):
    _recompute_q(tree, node)
    _update_flags(tree, node)
    _select_and_value(tree, node)


def backup(tree: PolicyTree, node: TreeNode, propagate: bool = True):
    """Recompute Q bounds, per-action certificates and node values; walk to root."""
    _recompute_q(tree, node)
    _select_and_value(tree, node)
    if propagate:
        cur = node.parent
        while cur is not None:
            parent, _, _ = cur
            _recompute_q(tree, parent)
            _select_and_value(tree, parent)
            cur = parent.parent


def prune(tree: PolicyTree, touched):
    """Recompute prune flags on the touched nodes (deepest first) and propagate."""
    ordered = sorted(touched, key=lambda n: -n.depth)
    for node in ordered:
        _refresh(tree, node)
    for node in ordered:
        cur = node.parent
        while cur is not None:
            parent, _, _ = cur
            _refresh(tree, parent)
            cur = parent.parent


# -- sampling ----------------------------------------------------------------


def sample(tree: PolicyTree, rng=None):
    """One descent; creates at most one new node and returns the visited path."""
    rng = tree.rng if rng is None else rng
    eps_t = max(tree.config.kappa * tree.gap(), tree.config.epsilon)
    if rng.random() < tree.config.heuristic_prob:
        return _sample_heuristic(tree, eps_t)
    return _sample_random(tree, rng)


def _mark_dead(tree: PolicyTree, node: TreeNode):
    node.dead = True
    node.pruned = True
    node.k = 0
    node.selected_action = None


def _sample_heuristic(tree: PolicyTree, eps_t: float):
    gamma = tree.model.gamma
    node = tree.root
    path = [node]
    lo = node.v_lower_r
    hi = lo + eps_t
    t = 1
    while t <= tree.config.max_depth:
        if node.pruned or node.dead:
            return path
        scale = gamma ** (-t)
        predicted = node.v_lower_r
        if predicted <= lo + TOL and node.v_upper_r <= max(hi, node.v_lower_r + eps_t * scale) + TOL:
            return path
        stats = node.stats
        cands = [a for a, s in enumerate(stats) if not s.pruned and s.q_lower_c <= node.d + TOL]
        if not cands:
            _mark_dead(tree, node)
            return path
        q_floor = max(s.q_lower_r for s in stats)
        lo = max(lo, q_floor)
        hi = max(hi, q_floor + scale * eps_t)
        a = max(cands, key=lambda i: (stats[i].q_upper_r, -i))
        stat = stats[a]
        best_o, best_score = -1, -INF
        for o, p in enumerate(stat.probs):
            if p <= 1e-12:
                continue
            c_ur, c_lr, _, _ = _child_bounds(stat, o)
            score = p * ((c_ur - c_lr) - eps_t * scale)
            if score > best_score + 1e-15:
                best_o, best_score = o, score
        if best_o < 0:
            return path
        p_o = stat.probs[best_o]
        rest_lr = sum(
            stat.probs[o] * _child_bounds(stat, o)[1]
            for o in range(len(stat.probs))
            if o != best_o and stat.probs[o] > 1e-12
        )
        rest_ur = sum(
            stat.probs[o] * _child_bounds(stat, o)[0]
            for o in range(len(stat.probs))
            if o != best_o and stat.probs[o] > 1e-12
        )
        lo = ((lo - stat.exp_reward) / gamma - rest_lr) / p_o
        hi = ((hi - stat.exp_reward) / gamma - rest_ur) / p_o
        child = stat.children[best_o]
        if child is None:
            child = tree.expand(node, a, best_o)
            path.append(child)
            return path
        path.append(child)
        node = child
        t += 1
    return path


def _sample_random(tree: PolicyTree, rng):
    # while the root certificate is open, target branches whose horizon
    # guarantee still falls short; once certified, explore for value
    targeting = tree.root.k < tree.config.k_target
    node = tree.root
    path = [node]
    for _ in range(tree.config.max_depth):
        if node.pruned or node.dead:
            return path
        k_need = tree.k_needed(node.depth)
        stats = node.stats
        admissible = [a for a, s in enumerate(stats) if s.q_lower_c <= node.d + TOL]
        if not admissible:
            _mark_dead(tree, node)
            return path
        if targeting:
            cands = [a for a in admissible if not stats[a].p_child and stats[a].k < k_need]
        else:
            cands = [a for a in admissible if not (stats[a].p_child or stats[a].p_rival)]
        if not cands:
            return path
        a = int(rng.choice(cands))
        stat = stats[a]
        obs = [
            o
            for o, p in enumerate(stat.probs)
            if p > 1e-12
            and (not targeting or _child_k(stat, o) < k_need)
            and (stat.children[o] is None or not stat.children[o].pruned)
        ]
        if not obs:
            return path
        o = int(rng.choice(obs))
        child = stat.children[o]
        if child is None:
            child = tree.expand(node, a, o)
            path.append(child)
            return path
        path.append(child)
        node = child
    return path


# -- solve loop ---------------------------------------------------------------


@dataclass
class ArcsResult:
    tree: PolicyTree
    gamma_cmin: AlphaPairSet
    certified_k: float
    iterations: int
    wall_time: float
    lower_reward: float
    upper_reward: float
    cost_upper: float
    status: str  # certified | budget | stalled | infeasible

    @property
    def root(self) -> TreeNode:
        return self.tree.root


def _terminated(tree: PolicyTree) -> bool:
    cfg = tree.config
    root = tree.root
    if root.pruned:
        return True
    if cfg.k_target != INF:
        return root.k >= cfg.k_target
    return root.k == INF and tree.gap() <= cfg.epsilon


def solve(
    model: TabularCPomdp,
    k_target: float = INF,
    epsilon: float = 0.01,
    time_budget: float = 60.0,
    gamma_cmin: AlphaPairSet | None = None,
    config: ArcsConfig | None = None,
) -> ArcsResult:
    """Run the anytime solve loop; always returns the best tree found."""
    cfg = config or ArcsConfig()
    cfg.k_target = k_target
    cfg.epsilon = epsilon
    cfg.time_budget = time_budget
    start = time.monotonic()
    deadline = start + time_budget
    if gamma_cmin is None:
        gamma_cmin = solve_min_cost_policy(
            model,
            time_budget=cfg.mincost_budget_frac * cfg.time_budget,
            rng=np.random.default_rng(cfg.seed),
        )
    tree = PolicyTree(model, gamma_cmin, cfg)
    iterations = 0
    stall = 0
    prev_lower, prev_upper = tree.root.v_lower_r, tree.root.v_upper_r
    status = "budget"
    while True:
        if _terminated(tree):
            status = "infeasible" if tree.root.pruned else "certified"
            break
        if time.monotonic() >= deadline:
            status = "budget"
            break
        if cfg.max_iterations is not None and iterations >= cfg.max_iterations:
            status = "budget"
            break
        n_before = len(tree.nodes)
        path = sample(tree)
        for node in reversed(path):
            _refresh(tree, node)
        iterations += 1
        stall = stall + 1 if len(tree.nodes) == n_before else 0
        if stall >= cfg.stall_limit:
            status = "stalled"
            break
        if cfg.check_monotone:
            assert tree.root.v_lower_r >= prev_lower - 1e-9, "root lower reward bound decreased"
            assert tree.root.v_upper_r <= prev_upper + 1e-9, "root upper reward bound increased"
            prev_lower, prev_upper = tree.root.v_lower_r, tree.root.v_upper_r
    return ArcsResult(
        tree=tree,
        gamma_cmin=gamma_cmin,
        certified_k=tree.root.k,
        iterations=iterations,
        wall_time=time.monotonic() - start,
        lower_reward=tree.root.v_lower_r,
        upper_reward=tree.root.v_upper_r,
        cost_upper=tree.root.v_upper_c,
        status=status,
    )


# -- execution ----------------------------------------------------------------


def execute_action(tree: PolicyTree, gamma_cmin: AlphaPairSet, b: np.ndarray, d: float) -> int:
    """Action for a (belief, budget) pair: tree lookup, else min-cost fallback."""
    for node in tree.nodes:
        if abs(node.d - d) <= TOL and np.abs(node.belief - b).sum() <= TOL:
            if node.selected_action is not None and not node.pruned:
                return int(node.selected_action)
            break
    return gamma_cmin.action_at(b)


# -- export -------------------------------------------------------------------


def _k_json(k):
    return None if k == INF else int(k)


def tree_to_dict(result: ArcsResult) -> dict:
    nodes = []
    for node in result.tree.nodes:
        children = {}
        for a, stat in enumerate(node.stats):
            for o, child in enumerate(stat.children):
                if child is not None:
                    children[f"{a},{o}"] = child.node_id
        nodes.append(
            {
                "id": node.node_id,
                "belief": node.belief.tolist(),
                "d": node.d,
                "k": _k_json(node.k),
                "depth": node.depth,
                "action": None if node.selected_action is None else int(node.selected_action),
                "pruned": bool(node.pruned),
                "dead": bool(node.dead),
                "children": children,
            }
        )
    return {
        "type": "arcs",
        "certified_k": _k_json(result.certified_k),
        "lower_reward": result.lower_reward,
        "upper_reward": result.upper_reward,
        "cost_upper": result.cost_upper,
        "c_max": result.tree.c_max,
        "nodes": nodes,
        "gamma_cmin": result.gamma_cmin.to_dict(),
    }
