"""Command-line front end: solve, eval, compare, export-model.

Every run writes a manifest (full configuration, seed, package version) next
to its primary output so results can be reproduced bit-for-bit.  Exit codes:
0 success, 2 usage/config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import arcs, baseline, sim
from .bounds import AlphaPairSet, solve_min_cost_policy
from .envs import EnvSpec
from .errors import RcPomdpError
from .model import TabularCPomdp, load_model, model_to_dict, save_model

SOLVERS = ("arcs", "cgcp", "cgcp-cl", "mincost")


class UsageError(Exception):
    pass


def _package_version() -> str:
    try:
        return version("rcpomdp")
    except PackageNotFoundError:  # editable/source checkout
        return "0.1.0+src"


def _env_override(name, fallback, cast):
    raw = os.environ.get(name)
    return cast(raw) if raw is not None else fallback


def _parse_params(pairs):
    params = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise UsageError(f"--param expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _load_env_or_model(args) -> TabularCPomdp:
    if getattr(args, "model", None):
        return load_model(args.model)
    if getattr(args, "env", None):
        return EnvSpec(args.env, _parse_params(getattr(args, "param", None))).build()
    raise UsageError("one of --env or --model is required")


def _write_manifest(out_path, args, extra=None):
    manifest = {
        "argv": sys.argv[1:],
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "version": _package_version(),
        "numpy": np.__version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        manifest.update(extra)
    with open(str(out_path) + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _parse_k(raw):
    if raw in ("inf", "infinity", None):
        return math.inf
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"--k expects an integer or 'inf', got {raw!r}") from exc


def _solve_policy(model, solver, args):
    budget = _env_override("RCPOMDP_BUDGET", args.budget, float)
    seed = _env_override("RCPOMDP_SEED", args.seed, int)
    started = time.monotonic()
    if solver == "arcs":
        cfg = arcs.ArcsConfig(seed=seed)
        result = arcs.solve(
            model,
            k_target=_parse_k(args.k),
            epsilon=args.epsilon,
            time_budget=budget,
            config=cfg,
        )
        artifact = arcs.tree_to_dict(result)
        report = {
            "solver": "arcs",
            "wall_time": result.wall_time,
            "iterations": result.iterations,
            "certified_k": None if result.certified_k == math.inf else result.certified_k,
            "lower_reward": result.lower_reward,
            "upper_reward": result.upper_reward,
            "cost_upper": result.cost_upper,
            "status": result.status,
            "nodes": len(result.tree.nodes),
        }
    elif solver == "cgcp":
        cfg = baseline.CgcpConfig(time_budget=budget, seed=seed)
        mixed = baseline.solve_cgcp(model, cfg)
        artifact = mixed.to_dict()
        vr, vc = mixed.mixture_value()
        report = {
            "solver": "cgcp",
            "wall_time": time.monotonic() - started,
            "mixture_reward": vr,
            "mixture_cost": vc,
            "columns": len(mixed.columns),
        }
    elif solver == "cgcp-cl":
        artifact = {"type": "cgcp-cl", "per_step_budget": args.per_step_budget}
        report = {"solver": "cgcp-cl", "per_step_budget": args.per_step_budget}
    elif solver == "mincost":
        gamma_cmin = solve_min_cost_policy(model, time_budget=budget,
                                           rng=np.random.default_rng(seed))
        artifact = {"type": "mincost", "gamma_cmin": gamma_cmin.to_dict()}
        report = {
            "solver": "mincost",
            "wall_time": time.monotonic() - started,
            "cost_at_b0": gamma_cmin.cost_at(model.b0),
            "reward_at_b0": gamma_cmin.reward_at(model.b0),
        }
    else:
        raise UsageError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    return artifact, report


def cmd_solve(args):
    model = _load_env_or_model(args)
    if args.solver not in SOLVERS:
        raise UsageError(f"unknown solver {args.solver!r}; choose from {SOLVERS}")
    artifact, report = _solve_policy(model, args.solver, args)
    with open(args.out, "w") as fh:
        json.dump(artifact, fh)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2)
    _write_manifest(args.out, args, {"report": report})
    print(json.dumps(report, indent=2))
    return 0


def cmd_eval(args):
    model = _load_env_or_model(args)
    seed = _env_override("RCPOMDP_SEED", args.seed, int)
    if args.policy:
        with open(args.policy) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise RcPomdpError(f"corrupt policy file {args.policy}: {exc}") from exc
        try:
            policy = sim.policy_from_dict(data, model, per_step_budget=args.per_step_budget)
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise RcPomdpError(f"policy file {args.policy} does not match schema: {exc}") from exc
    elif args.solver:
        artifact, _ = _solve_policy(model, args.solver, args)
        policy = sim.policy_from_dict(artifact, model, per_step_budget=args.per_step_budget)
    else:
        raise UsageError("eval requires --policy or --solver")
    agg, runs = sim.evaluate(
        model, policy, trials=args.trials, horizon=args.horizon, seed=seed,
        record_trajectories=bool(args.trajectories),
    )
    if args.out_csv:
        sim.write_trials_csv(args.out_csv, runs)
    if args.out_json:
        sim.write_aggregate_json(args.out_json, agg)
    if args.trajectories:
        sim.write_trajectories_csv(args.trajectories, runs)
    out_anchor = args.out_json or args.out_csv or "eval"
    _write_manifest(out_anchor, args, {"aggregate": agg.to_dict()})
    print(json.dumps(agg.to_dict(), indent=2))
    return 0


def _format_table(rows, header, fmt):
    if fmt == "csv":
        lines = [",".join(header)]
        lines += [",".join(str(v) for v in row) for row in rows]
        return "\n".join(lines) + "\n"
    widths = [max(len(str(v)) for v in [h] + [row[i] for row in rows]) for i, h in enumerate(header)]
    def line(vals):
        return "| " + " | ".join(str(v).ljust(w) for v, w in zip(vals, widths)) + " |"
    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(header), sep] + [line(r) for r in rows]) + "\n"


def cmd_compare(args):
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    if len(solvers) < 2:
        raise UsageError("compare requires at least two solvers")
    model = _load_env_or_model(args)
    seed = _env_override("RCPOMDP_SEED", args.seed, int)
    rows = []
    env_name = args.env or args.model
    for solver in solvers:
        artifact, _ = _solve_policy(model, solver, args)
        policy = sim.policy_from_dict(artifact, model, per_step_budget=args.per_step_budget)
        trials = args.cl_trials if solver == "cgcp-cl" else args.trials
        agg, _ = sim.evaluate(model, policy, trials=trials, horizon=args.horizon, seed=seed)
        rows.append(
            [
                env_name,
                solver,
                f"{agg.violation_rate:.3f}",
                f"{agg.mean_reward:.3f}±{agg.sem_reward:.3f}",
                f"{agg.mean_cost:.3f}±{agg.sem_cost:.3f}",
            ]
        )
    header = ["env", "algorithm", "violation_rate", "reward", "cost"]
    table = _format_table(rows, header, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table)
        _write_manifest(args.out, args)
    print(table, end="")
    return 0


def cmd_export_model(args):
    model = _load_env_or_model(args)
    save_model(model, args.out)
    _write_manifest(args.out, args, {"states": model.n_states})
    print(f"wrote {args.out}: |S|={model.n_states} |A|={model.n_actions} |O|={model.n_observations}")
    return 0


def _add_common(p, with_solver_opts=True):
    p.add_argument("--env", help="benchmark name: ce, ctiger, crs, tunnels")
    p.add_argument("--model", help="path to a model JSON file")
    p.add_argument("--param", action="append", help="environment parameter key=value")
    p.add_argument("--seed", type=int, default=11878)
    if with_solver_opts:
        p.add_argument("--budget", type=float, default=300.0, help="solve budget, seconds")
        p.add_argument("--k", default="inf", help="admissibility horizon target")
        p.add_argument("--epsilon", type=float, default=0.01)
        p.add_argument("--per-step-budget", type=float, default=5.0, dest="per_step_budget")


def build_parser():
    parser = argparse.ArgumentParser(prog="rcpomdp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an environment and write a policy artifact")
    _add_common(p)
    p.add_argument("--solver", required=True, choices=SOLVERS)
    p.add_argument("--out", default="policy.json")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="Monte-Carlo evaluation of a policy")
    _add_common(p)
    p.add_argument("--policy", help="policy artifact JSON")
    p.add_argument("--solver", choices=SOLVERS, help="solve inline instead of loading")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--trajectories", help="write per-step trajectory CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="solve and evaluate several solvers side by side")
    _add_common(p)
    p.add_argument("--solvers", required=True, help="comma-separated solver names")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--cl-trials", type=int, default=100, dest="cl_trials")
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--format", choices=("csv", "md"), default="md")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-model", help="write an environment as a model JSON file")
    _add_common(p, with_solver_opts=False)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_export_model)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RcPomdpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
