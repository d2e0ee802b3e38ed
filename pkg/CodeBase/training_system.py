"""
Training System - Execution Engine for KLC-OPI Runs

This module provides the TrainingSystem class which orchestrates a learning
run. It takes a model and a RunConfig, picks the iteration scheme (synchronous
KLC-OPI or asynchronous ASYNC-KLC-OPI), runs K iterations and records one
trace row per iteration.

Trace row k (1..K) describes the estimate after k iterations: its sup-norm
error against an optional exact oracle, its Bellman residual, the step size
and mean return of the iteration that produced it, and the size of the batch
that iteration evaluated.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from CodeBase.Learning.opi_learner import LearnerState, async_iteration, sync_iteration
from CodeBase.Planning.exact_solver import sup_residual
from CodeBase.errors import ConfigError

logger = logging.getLogger("klc_opi.training")

TRACE_COLUMNS = ["k", "sup_err_vstar", "bellman_residual", "mean_return", "alpha", "d_size"]


@dataclass
class RunResult:
    """
    Outcome of a training run.

    Attributes:
        trace: List of trace rows (dicts with TRACE_COLUMNS plus "sampled")
        final_state: LearnerState after K iterations
        history: v_0, ..., v_K when config.keep_values, else empty
        sets: D_0, ..., D_{K-1} when config.record_sets, else empty
    """

    trace: list
    final_state: LearnerState
    history: list = field(default_factory=list)
    sets: list = field(default_factory=list)

    @property
    def v_final(self):
        return self.final_state.v

    def trace_frame(self):
        """
        Trace as a DataFrame with the TRACE_COLUMNS columns.
        """
        return pd.DataFrame([{c: row[c] for c in TRACE_COLUMNS} for row in self.trace], columns=TRACE_COLUMNS)

    def sup_diff_to_final(self):
        """
        ||v_k - v_K||_inf for k = 0..K (needs keep_values).
        """
        if not self.history:
            raise ConfigError("sup_diff_to_final needs a run with keep_values=True")
        v_final = self.history[-1]
        return np.array([float(np.max(np.abs(v - v_final))) for v in self.history])


class TrainingSystem:
    """
    Main execution engine for learning runs.

    This class validates a configuration against the model, builds the initial
    learner state, selects the iteration scheme through a small factory and
    runs the loop, collecting trace rows and optional history.
    """

    def __init__(self, model, config, v_star=None, v0=None):
        """
        Initialize the training system.

        Args:
            model: Model to learn on
            config: RunConfig
            v_star: Optional exact solution for the sup_err_vstar column
            v0: Initial vector for init_rule "explicit"
        """
        config.validate_for(model)
        self.model = model
        self.cfg = config
        self.v_star = None if v_star is None else np.asarray(v_star, dtype=float)
        self.v0 = v0
        self.state = None

    # --------------------------------------------------
    # Scheme factory
    # --------------------------------------------------
    def _create_scheme(self):
        """
        Return a step function mapping a LearnerState to (next state, D_k).
        """
        model, cfg = self.model, self.cfg
        if cfg.scheme == "sync":
            def step(state):
                nxt = sync_iteration(state, model, cfg)
                return nxt, nxt.last_step.sampled
            return step
        if cfg.scheme == "async":
            return lambda state: async_iteration(state, model, cfg)
        raise ConfigError(f"Scheme {cfg.scheme!r} not supported")

    def _row(self, state, sampled):
        info = state.last_step
        return {
            "k": state.k,
            "sup_err_vstar": (
                float(np.max(np.abs(state.v - self.v_star))) if self.v_star is not None else float("nan")
            ),
            "bellman_residual": sup_residual(self.model, state.v),
            "mean_return": info.mean_return,
            "alpha": info.alpha,
            "d_size": int(sampled.size),
            "sampled": sampled,
        }

    # --------------------------------------------------
    # MAIN EXECUTION
    # --------------------------------------------------
    def run(self):
        """
        Run K iterations of the configured scheme.

        Returns:
            RunResult
        """
        cfg = self.cfg
        state = LearnerState.initial(self.model, cfg, self.v0)
        step = self._create_scheme()
        logger.info(
            "[TRAIN] %s %s run on %s: K=%d m=%d D=%s seed=%d",
            cfg.scheme, cfg.mode, self.model.name, cfg.K, cfg.m,
            cfg.batch_size(self.model.n_states), cfg.seed,
        )

        trace, history, sets = [], [], []
        if cfg.keep_values:
            history.append(state.v.copy())
        for _ in range(cfg.K):
            state, sampled = step(state)
            row = self._row(state, sampled)
            trace.append(row)
            if cfg.keep_values:
                history.append(state.v.copy())
            if cfg.record_sets:
                sets.append(sampled)
            logger.debug(
                "[TRAIN] k=%d residual=%.4e sup_err=%.4e",
                row["k"], row["bellman_residual"], row["sup_err_vstar"],
            )

        self.state = state
        if trace:
            logger.info(
                "[TRAIN] finished at k=%d: residual %.4e, sup_err %.4e",
                state.k, trace[-1]["bellman_residual"], trace[-1]["sup_err_vstar"],
            )
        return RunResult(trace=trace, final_state=state, history=history, sets=sets)


def run(model, config, v_star=None, v0=None):
    """
    Execute a learning run.

    Args:
        model: Model
        config: RunConfig
        v_star: Optional exact solution for the sup-norm error column
        v0: Initial vector for init_rule "explicit"

    Returns:
        RunResult
    """
    return TrainingSystem(model, config, v_star=v_star, v0=v0).run()
