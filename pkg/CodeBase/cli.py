"""
Command-Line Interface - solve, train, experiment, evaluate, compare, validate

Every subcommand reads an optional JSON config file; flags given on the command
line override the file. Output files go to --out and each one carries the
fully resolved configuration (CSV comment line or JSON "provenance" field).

Exit codes: 0 success, 2 configuration or model error, 3 numeric failure.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from CodeBase.Environment.grid_spec import GridSpec
from CodeBase.Environment.model_io import load_model, load_policy, load_values, save_policy, save_values
from CodeBase.Environment.staghare import DEFAULT_START_STATES, build_model, deterministic_baseline
from CodeBase.Evaluation.metrics import DEFAULT_EPISODES, DEFAULT_HORIZON, compare_policies, evaluate_policy
from CodeBase.Evaluation.experiment import run_batch_experiment, summarize_curves
from CodeBase.Evaluation.run_on_model import run_on_model
from CodeBase.Learning.rng_streams import RngLineage
from CodeBase.Learning.rollouts import default_rollout_length
from CodeBase.Learning.run_config import RunConfig, coerce_number
from CodeBase.Planning.exact_solver import DEFAULT_MAX_ITERS, DEFAULT_TOL, exact_policy_evaluation, value_iteration
from CodeBase.Planning.operators import greedy_policy
from CodeBase.Util.config_utils import load_config, merge_overrides
from CodeBase.Util.csv_utils import write_csv_with_header
from CodeBase.Util.log_utils import configure_logging
from CodeBase.errors import (
    EXIT_CONFIG_ERROR,
    EXIT_NUMERIC_FAILURE,
    EXIT_OK,
    ConfigError,
    ConvergenceError,
    ModelError,
)

logger = logging.getLogger("klc_opi.cli")

ENVIRONMENTS = ("staghare",)
GRID_PRESETS = ("standard", "small")
DEFAULT_D_LIST = (20, 40, 60, 80)
DEFAULT_N_SEEDS = 10


# --------------------------------------------------
# Resolution helpers
# --------------------------------------------------
def _grid_spec(config):
    data = dict(config.get("grid") or {})
    if config.get("grid_preset") == "small":
        base = GridSpec.small_variant().to_dict()
        base.update(data)
        data = base
    if config.get("gamma") is not None:
        data["gamma"] = float(config["gamma"])
    return GridSpec.from_dict(data)


def resolve_model(config):
    """
    Build the model a config describes: a serialised model file or a built-in env.

    Returns:
        Tuple (model, grid_spec or None)
    """
    if config.get("model"):
        model = load_model(config["model"])
        if config.get("gamma") is not None:
            model = model.with_gamma(float(config["gamma"]))
        return model, None
    env = config.get("env", "staghare")
    if env not in ENVIRONMENTS:
        raise ConfigError(f"Unknown environment {env!r}; use one of {ENVIRONMENTS} or --model")
    spec = _grid_spec(config)
    return build_model(spec), spec


def resolve_start_states(config, model, spec):
    """
    Start states from the config, or the four default hunting start states on the 5x5 grid.
    """
    states = config.get("start_states")
    if states:
        return [tuple(int(x) for x in s) if isinstance(s, (list, tuple)) else int(s) for s in states]
    if spec is not None and (spec.width, spec.height, spec.n_hunters) == (5, 5, 2):
        return list(DEFAULT_START_STATES)
    raise ConfigError("No start states given (use --start) and no default exists for this model")


def resolve_policy(model, path):
    """
    Load a policy JSON file, or derive the greedy policy from a value CSV.
    """
    if path is None:
        raise ConfigError("A policy file is required (--policy)")
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Policy file {path} does not exist")
    if path.suffix.lower() == ".csv":
        return greedy_policy(model, load_values(model, path))
    return load_policy(model, path)


def _out_dir(config):
    out = Path(config.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _provenance(config, command):
    return {"command": command, **{k: v for k, v in config.items() if v is not None}}


def _require_seed(config):
    if config.get("seed") is None:
        raise ConfigError("--seed is required for sampled runs")


def _number(config, key, kind, default):
    value = config.get(key)
    return coerce_number(key, default if value is None else value, kind)


def _int_list(config, key, default):
    values = config.get(key)
    if values is None:
        return list(default)
    if isinstance(values, str):
        values = [x for x in values.split(",") if x.strip()]
    return [coerce_number(key, x, int) for x in values]


# --------------------------------------------------
# Subcommands
# --------------------------------------------------
def cmd_solve(config):
    """
    Exact value iteration; writes vstar.csv and pistar.json.
    """
    model, _ = resolve_model(config)
    tol = _number(config, "tol", float, DEFAULT_TOL)
    max_iters = _number(config, "max_iters", int, DEFAULT_MAX_ITERS)
    if not tol > 0:
        raise ConfigError(f"--tol must be positive, got {tol}")
    report = value_iteration(model, tol=tol, max_iters=max_iters)

    out = _out_dir(config)
    provenance = _provenance(config, "solve")
    save_values(report.v_star, out / "vstar.csv", column="v_star", provenance=provenance)
    save_policy(model, report.pi_star, out / "pistar.json", provenance=provenance)
    print(f"[SOLVER] {model.name}: iterations={report.iterations} final_residual={report.final_residual:.3e}")
    return EXIT_OK


def _run_config(config, model):
    init_rule = config.get("init_rule")
    if config.get("v0"):
        if init_rule is None:
            init_rule = "explicit"
        elif init_rule != "explicit":
            raise ConfigError(f"--v0 needs init rule 'explicit', got {init_rule!r}")
    keys = {
        "m": config.get("m") or default_rollout_length(model.gamma),
        "gamma": model.gamma,
        "K": config.get("K"),
        "D": config.get("D"),
        "lr_c0": config.get("lr_c0"),
        "seed": config.get("seed"),
        "mode": config.get("mode"),
        "sampling_rule": config.get("sampling_rule"),
        "init_rule": init_rule,
        "scheme": config.get("scheme"),
        "lr_schedule": config.get("lr_schedule"),
        "workers": config.get("workers"),
        "record_sets": bool(config.get("jsonl")) or None,
    }
    return RunConfig.from_dict({k: v for k, v in keys.items() if v is not None})


def _json_value(x):
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


def cmd_train(config):
    """
    KLC-OPI / ASYNC-KLC-OPI training; writes trace.csv, vfinal.csv and pifinal.json.
    """
    model, _ = resolve_model(config)
    run_cfg = _run_config(config, model)
    if run_cfg.mode == "sampled":
        _require_seed(config)
    v_star = load_values(model, config["oracle"]) if config.get("oracle") else None
    v0 = load_values(model, config["v0"]) if config.get("v0") else None

    stats = run_on_model(model, run_cfg, v_star=v_star, v0=v0)
    result = stats["result"]

    out = _out_dir(config)
    provenance = _provenance({**config, **run_cfg.to_dict()}, "train")
    write_csv_with_header(result.trace_frame(), out / "trace.csv", provenance)
    save_values(result.v_final, out / "vfinal.csv", column="v_final", provenance=provenance)
    save_policy(model, greedy_policy(model, result.v_final), out / "pifinal.json", provenance=provenance)
    if config.get("jsonl"):
        with open(out / "trace.jsonl", "w", encoding="utf-8", newline="\n") as f:
            # first line: provenance header, then one record per iteration
            f.write(json.dumps({"provenance": provenance, "model": model.name}, default=str) + "\n")
            for row in result.trace:
                record = {k: _json_value(v) for k, v in row.items() if k != "sampled"}
                record["sampled"] = [int(s) for s in row["sampled"]]
                f.write(json.dumps(record) + "\n")

    print(
        f"[TRAIN] {run_cfg.scheme}/{run_cfg.mode} K={run_cfg.K} "
        f"final_residual={stats['final_residual']:.4e} final_sup_err={stats['final_sup_err']:.4e} "
        f"runtime_ms={stats['runtime_ms']:.1f} memory_kb={stats['memory_kb']:.1f}"
    )
    return EXIT_OK


def cmd_experiment(config):
    """
    Asynchronous runs over a list of batch sizes and seeds; writes the
    seed-averaged curves (experiment_curves.csv) and one row per run
    (experiment_runs.csv).
    """
    model, _ = resolve_model(config)
    d_values = _int_list(config, "d_list", DEFAULT_D_LIST)
    seeds = _int_list(config, "seeds", range(DEFAULT_N_SEEDS))
    base = _run_config({**config, "scheme": "async", "D": d_values[0] if d_values else None,
                        "seed": seeds[0] if seeds else None}, model)
    v_star = load_values(model, config["oracle"]) if config.get("oracle") else None

    curves, runs = run_batch_experiment(model, base, d_values, seeds, v_star=v_star)

    out = _out_dir(config)
    provenance = _provenance(
        {**config, **base.to_dict(), "D": None, "seed": None, "d_list": d_values, "seeds": seeds}, "experiment"
    )
    write_csv_with_header(summarize_curves(curves), out / "experiment_curves.csv", provenance)
    write_csv_with_header(runs, out / "experiment_runs.csv", provenance)
    print(f"[EXPERIMENT] {model.name}: D={d_values} seeds={len(seeds)} K={base.K}")
    print(runs.groupby("D")[["final_residual", "runtime_ms"]].mean().to_string())
    return EXIT_OK


def _episode_settings(config):
    horizon = _number(config, "horizon", int, DEFAULT_HORIZON)
    n_episodes = _number(config, "n_episodes", int, DEFAULT_EPISODES)
    rng = RngLineage(_number(config, "seed", int, None)).evaluation_stream(0)
    return horizon, n_episodes, rng


def cmd_evaluate(config):
    """
    Monte-Carlo evaluation of one policy; writes evaluate.csv.
    """
    model, spec = resolve_model(config)
    _require_seed(config)
    if config.get("baseline"):
        if spec is None:
            raise ConfigError("--baseline needs a built-in environment")
        pi, label = deterministic_baseline(spec, model), "baseline"
    else:
        pi, label = resolve_policy(model, config.get("policy")), "policy"
    starts = resolve_start_states(config, model, spec)
    horizon, n_episodes, rng = _episode_settings(config)

    df = evaluate_policy(
        model, pi, starts, horizon, n_episodes, rng, label=label,
        discounted=bool(config.get("discounted")),
        exact_values=exact_policy_evaluation(model, pi),
    )
    write_csv_with_header(df, _out_dir(config) / "evaluate.csv", _provenance(config, "evaluate"))
    print(df.to_string(index=False))
    return EXIT_OK


def cmd_compare(config):
    """
    Learned policy against a second policy (the deterministic baseline by default);
    writes compare.csv.
    """
    model, spec = resolve_model(config)
    _require_seed(config)
    pi_a = resolve_policy(model, config.get("policy"))
    if config.get("policy_b"):
        pi_b, label_b = resolve_policy(model, config["policy_b"]), "policy_b"
    elif spec is not None:
        pi_b, label_b = deterministic_baseline(spec, model), "baseline"
    else:
        raise ConfigError("A serialised model needs --policy-b to compare against")
    starts = resolve_start_states(config, model, spec)
    horizon, n_episodes, rng = _episode_settings(config)

    df = compare_policies(
        model, pi_a, pi_b, starts, horizon, n_episodes, rng,
        labels=("learned", label_b), discounted=bool(config.get("discounted")),
    )
    write_csv_with_header(df, _out_dir(config) / "compare.csv", _provenance(config, "compare"))
    print(df.to_string(index=False))
    return EXIT_OK


def cmd_validate(config):
    """
    Print pass/fail per structural assumption (diagnostic, always exit 0).
    """
    model, _ = resolve_model(config)
    policy = resolve_policy(model, config["policy"]) if config.get("policy") else None
    for report in model.check_assumptions(batch_size=config.get("D"), policy=policy):
        print(report.line())
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "train": cmd_train,
    "experiment": cmd_experiment,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


# --------------------------------------------------
# Parser
# --------------------------------------------------
def _parse_state(text):
    try:
        parts = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"start state must look like 20,4 (got {text!r})")
    return parts if len(parts) > 1 else parts[0]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--env", choices=ENVIRONMENTS, default=None)
    common.add_argument("--grid", dest="grid_preset", choices=GRID_PRESETS, default=None,
                        help="built-in grid size (standard 5x5 or small 3x3)")
    common.add_argument("--model", default=None, help="serialised model JSON")
    common.add_argument("--gamma", type=float, default=None)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=None)

    episodes = argparse.ArgumentParser(add_help=False)
    episodes.add_argument("--policy", default=None, help="policy JSON or value CSV")
    episodes.add_argument("--start", dest="start_states", type=_parse_state, action="append", default=None)
    episodes.add_argument("--horizon", type=int, default=None)
    episodes.add_argument("--episodes", dest="n_episodes", type=int, default=None)
    episodes.add_argument("--discounted", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="klc-opi", description="KL-control optimistic policy iteration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="exact value iteration")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--m", type=int, default=None, help="rollout length")
    training.add_argument("--k", dest="K", type=int, default=None, help="number of iterations")
    training.add_argument("--mode", choices=("sampled", "expected"), default=None)
    training.add_argument("--lr-c0", dest="lr_c0", type=float, default=None)
    training.add_argument("--lr-schedule", dest="lr_schedule", choices=("harmonic", "visits", "unit"),
                          default=None)
    training.add_argument("--sampling-rule", dest="sampling_rule",
                          choices=("joint", "product_of_marginals"), default=None)
    training.add_argument("--oracle", default=None, help="vstar.csv for the sup_err_vstar column")

    p = sub.add_parser("train", parents=[common, training], help="run KLC-OPI or ASYNC-KLC-OPI")
    p.add_argument("--scheme", choices=("sync", "async"), default=None)
    p.add_argument("--d", dest="D", type=int, default=None, help="async batch size")
    p.add_argument("--init-rule", dest="init_rule", choices=("upper_constant", "explicit"), default=None)
    p.add_argument("--v0", default=None, help="value CSV; implies init rule explicit")
    p.add_argument("--jsonl", action="store_true", default=None, help="also write trace.jsonl")

    p = sub.add_parser("experiment", parents=[common, training],
                       help="async runs averaged over batch sizes and seeds")
    p.add_argument("--d-list", dest="d_list", default=None, help="comma-separated batch sizes (20,40,60,80)")
    p.add_argument("--seeds", default=None, help="comma-separated master seeds (0..9)")

    p = sub.add_parser("evaluate", parents=[common, episodes], help="Monte-Carlo evaluation")
    p.add_argument("--baseline", action="store_true", default=None,
                   help="evaluate the deterministic baseline instead of --policy")

    p = sub.add_parser("compare", parents=[common, episodes], help="learned policy vs baseline")
    p.add_argument("--policy-b", dest="policy_b", default=None)

    p = sub.add_parser("validate", parents=[common], help="check structural assumptions")
    p.add_argument("--d", dest="D", type=int, default=None)
    p.add_argument("--policy", default=None)
    return parser


def resolve_config(args):
    """
    Merge the JSON config file with the flags given on the command line.
    """
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    return merge_overrides(load_config(args.config), flags)


def main(argv=None):
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](config)
    except ConvergenceError as e:
        logger.error("[CLI] %s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC_FAILURE
    except (ConfigError, ModelError, OSError) as e:
        logger.error("[CLI] %s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
