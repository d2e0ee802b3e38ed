"""
Exact Solver - Ground-Truth Planning Oracles

This module provides the exact planners used as oracles for the learning
schemes: value iteration on the optimal operator, exact policy evaluation by a
sparse linear solve, and exact policy iteration alternating the two.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import identity
from scipy.sparse.linalg import spsolve

from CodeBase.Planning.operators import (
    apply_evaluation_operator,
    apply_optimal_operator,
    check_values,
    greedy_policy,
    one_step_costs,
)
from CodeBase.errors import ConvergenceError

logger = logging.getLogger("klc_opi.solver")

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 100_000
EVALUATION_TOL = 1e-9
POLICY_ITERATION_TOL = 1e-10


@dataclass
class SolveReport:
    """
    Result of an exact solve.

    Attributes:
        v_star: Value vector at termination
        pi_star: Boltzmann greedy policy of v_star
        iterations: Number of operator applications (VI) or improvement steps (PI)
        final_residual: sup-norm of T v_star - v_star
        residuals: Residual after each iteration
    """

    v_star: np.ndarray
    pi_star: object
    iterations: int
    final_residual: float
    residuals: list


def sup_residual(model, v):
    """
    Bellman residual ||T V - V||_inf under the optimal operator.
    """
    return float(np.max(np.abs(apply_optimal_operator(model, v) - v)))


def iterate_optimal_operator(model, v0=None):
    """
    Yield the value iteration sequence V_0, V_1 = T V_0, V_2 = T V_1, ...

    Args:
        model: Model
        v0: Starting vector (zeros when None)

    Yields:
        Value vectors, starting with a copy of v0
    """
    v = np.zeros(model.n_states) if v0 is None else check_values(model, v0).copy()
    while True:
        yield v
        v = apply_optimal_operator(model, v)


def value_iteration(model, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, v0=None):
    """
    Fixed-point iteration of the optimal operator until ||T V - V||_inf <= tol.

    By contraction the returned v_star is within tol * gamma / (1 - gamma) of V*.

    Args:
        model: Model
        tol: Residual tolerance (> 0)
        max_iters: Maximum number of operator applications
        v0: Starting vector (zeros when None)

    Returns:
        SolveReport

    Raises:
        ValueError: If tol is not positive
        ConvergenceError: If max_iters is exhausted; carries the last residual
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")

    v = np.zeros(model.n_states) if v0 is None else check_values(model, v0).copy()
    residuals = []
    for it in range(1, max_iters + 1):
        tv = apply_optimal_operator(model, v)
        residual = float(np.max(np.abs(tv - v)))
        residuals.append(residual)
        if residual <= tol:
            logger.info(
                "[SOLVER] value iteration converged on %s: %d iterations, residual %.3e",
                model.name, it, residual,
            )
            return SolveReport(v, greedy_policy(model, v), it, residual, residuals)
        v = tv

    raise ConvergenceError(
        f"Value iteration did not reach tol={tol} in {max_iters} iterations "
        f"(last residual {residuals[-1]:.3e})",
        last_residual=residuals[-1], iterations=max_iters,
    )


def exact_policy_evaluation(model, pi):
    """
    Exact value of a policy: the solution of (I - gamma P_pi) V = q_pi.

    Solved directly with a sparse LU factorisation, then polished with
    fixed-point sweeps of T^pi if the residual is above 1e-9.

    Args:
        model: Model
        pi: JointPolicy

    Returns:
        Value vector V^pi with ||T^pi V^pi - V^pi||_inf <= 1e-9
    """
    q = one_step_costs(model, pi)
    system = (identity(model.n_states, format="csc") - model.gamma * pi.to_sparse()).tocsc()
    v = np.asarray(spsolve(system, q), dtype=float)

    residual = float(np.max(np.abs(apply_evaluation_operator(model, pi, v) - v)))
    sweeps = 0
    while residual > EVALUATION_TOL and sweeps < DEFAULT_MAX_ITERS:
        v = apply_evaluation_operator(model, pi, v)
        residual = float(np.max(np.abs(apply_evaluation_operator(model, pi, v) - v)))
        sweeps += 1
    logger.debug("[SOLVER] policy evaluation residual %.3e after %d polish sweeps", residual, sweeps)
    return v


def exact_policy_iteration(model, v0=None, max_iters=1_000, tol=POLICY_ITERATION_TOL):
    """
    Policy iteration: greedy improvement followed by exact evaluation.

    Stops when consecutive value vectors differ by at most ``tol`` in sup-norm.

    Args:
        model: Model
        v0: Starting value vector (zeros when None)
        max_iters: Maximum number of improvement steps
        tol: Stopping threshold on ||V_{k+1} - V_k||_inf

    Returns:
        SolveReport

    Raises:
        ConvergenceError: If max_iters is exhausted
    """
    v = np.zeros(model.n_states) if v0 is None else check_values(model, v0).copy()
    changes = []
    for it in range(1, max_iters + 1):
        pi = greedy_policy(model, v)
        v_next = exact_policy_evaluation(model, pi)
        change = float(np.max(np.abs(v_next - v)))
        changes.append(change)
        v = v_next
        if change <= tol:
            residual = sup_residual(model, v)
            logger.info(
                "[SOLVER] policy iteration converged on %s: %d iterations, residual %.3e",
                model.name, it, residual,
            )
            return SolveReport(v, greedy_policy(model, v), it, residual, changes)

    raise ConvergenceError(
        f"Policy iteration did not settle within {max_iters} iterations "
        f"(last change {changes[-1]:.3e})",
        last_residual=changes[-1], iterations=max_iters,
    )
