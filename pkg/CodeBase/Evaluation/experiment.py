"""
Experiment - Batch Runs over Batch Sizes and Seeds

This module runs one asynchronous training configuration for every
(D, seed) pair and collects the per-iteration curves into pandas tables: the
distance of each iterate to the run's final estimate, the sup-norm error
against an optional oracle and the mean rollout return. ``summarize_curves``
averages the curves over seeds for every batch size.
"""

import logging

import pandas as pd

from CodeBase.Evaluation.run_on_model import run_on_model
from CodeBase.errors import ConfigError

logger = logging.getLogger("klc_opi.experiment")

CURVE_COLUMNS = ["D", "seed", "k", "diff_to_final", "sup_err_vstar", "mean_return"]
RUN_COLUMNS = ["D", "seed", "K", "final_residual", "final_sup_err", "runtime_ms", "memory_kb"]
CURVE_METRICS = ["diff_to_final", "sup_err_vstar", "mean_return"]


def run_batch_experiment(model, config, d_values, seeds, v_star=None):
    """
    Run the asynchronous scheme for every batch size and seed.

    Args:
        model: Model
        config: RunConfig shared by all runs (scheme, D and seed are overridden)
        d_values: Batch sizes D
        seeds: Master seeds
        v_star: Optional exact solution for the sup_err_vstar column

    Returns:
        Tuple (curves, runs) of DataFrames with CURVE_COLUMNS and RUN_COLUMNS

    Raises:
        ConfigError: If d_values or seeds is empty, or a D is outside [1, |S|]
    """
    d_values = [int(d) for d in d_values]
    seeds = [int(s) for s in seeds]
    if not d_values or not seeds:
        raise ConfigError("An experiment needs at least one batch size and one seed")

    curves, runs = [], []
    for d in d_values:
        for seed in seeds:
            cfg = config.with_updates(scheme="async", D=d, seed=seed, keep_values=True)
            stats = run_on_model(model, cfg, v_star=v_star)
            result = stats["result"]
            diffs = result.sup_diff_to_final()
            for row in result.trace:
                curves.append({
                    "D": d,
                    "seed": seed,
                    "k": row["k"],
                    "diff_to_final": float(diffs[row["k"]]),
                    "sup_err_vstar": row["sup_err_vstar"],
                    "mean_return": row["mean_return"],
                })
            runs.append({
                "D": d,
                "seed": seed,
                "K": cfg.K,
                "final_residual": stats["final_residual"],
                "final_sup_err": stats["final_sup_err"],
                "runtime_ms": stats["runtime_ms"],
                "memory_kb": stats["memory_kb"],
            })
            logger.info("[EXPERIMENT] D=%d seed=%d finished in %.1f ms", d, seed, stats["runtime_ms"])

    return pd.DataFrame(curves, columns=CURVE_COLUMNS), pd.DataFrame(runs, columns=RUN_COLUMNS)


def summarize_curves(curves):
    """
    Average the curves over seeds.

    Args:
        curves: DataFrame from run_batch_experiment

    Returns:
        DataFrame with columns D, k, n_seeds and <metric>_mean / <metric>_std
        for every metric in CURVE_METRICS (std is 0 for a single seed)
    """
    grouped = curves.groupby(["D", "k"], sort=True)
    summary = grouped[CURVE_METRICS].agg(["mean", "std"])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    std_columns = [f"{metric}_std" for metric in CURVE_METRICS]
    counts = grouped["seed"].nunique()
    summary.loc[counts.to_numpy() < 2, std_columns] = 0.0
    summary.insert(0, "n_seeds", counts)
    return summary.reset_index()
