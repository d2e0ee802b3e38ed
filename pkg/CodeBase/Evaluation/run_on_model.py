"""
Run on Model - Headless Timed Training Runs

This module runs a training configuration on a fixed model and measures the
runtime and peak traced memory alongside the run's own metrics.
"""

import time
import tracemalloc

from CodeBase.training_system import TrainingSystem


def run_on_model(model, config, v_star=None, v0=None):
    """
    Run a training configuration headlessly on a fixed model.

    Parameters
    ----------
    model : Model
    config : RunConfig
    v_star : numpy array, optional
        Exact solution for the sup_err_vstar trace column
    v0 : numpy array, optional
        Initial vector for init_rule "explicit"

    Returns
    -------
    dict
        {
            "scheme", "mode", "K", "D",
            "result": RunResult,
            "final_residual": float (nan when K = 0),
            "final_sup_err": float (nan without v_star or when K = 0),
            "runtime_ms": float,
            "memory_kb": float,
        }
    """
    system = TrainingSystem(model, config, v_star=v_star, v0=v0)

    tracemalloc.start()
    start_time = time.perf_counter()
    result = system.run()
    end_time = time.perf_counter()

    current, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()

    last = result.trace[-1] if result.trace else {}
    return {
        "scheme": config.scheme,
        "mode": config.mode,
        "K": config.K,
        "D": config.batch_size(model.n_states),

        "result": result,
        "final_residual": last.get("bellman_residual", float("nan")),
        "final_sup_err": last.get("sup_err_vstar", float("nan")),

        "runtime_ms": (end_time - start_time) * 1000.0,
        "memory_kb": peak / 1024.0,
    }
