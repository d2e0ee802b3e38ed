"""
Metrics - Monte-Carlo Policy Evaluation and Comparisons

This module estimates episode returns of a joint policy by simulation, measures
sup-norm differences between value vectors, and compares two policies from a
list of start states using common random numbers (both policies consume the
same uniforms, so their difference carries less noise).
"""

import numpy as np
import pandas as pd

from CodeBase.Learning.rollouts import PolicySampler, simulate_returns
from CodeBase.errors import ConfigError, ModelError

DEFAULT_HORIZON = 20
DEFAULT_EPISODES = 1000

RESULT_COLUMNS = ["start_state", "policy", "mean_return", "std_return", "n_episodes", "horizon"]


def _summary(returns):
    # identical returns (a deterministic policy) report exactly zero spread
    if returns.size < 2 or np.ptp(returns) == 0.0:
        return float(np.mean(returns)), 0.0
    return float(np.mean(returns)), float(np.std(returns, ddof=1))


def episode_returns(model, pi, s0, horizon, uniforms, discounted=False):
    """
    Returns of a batch of episodes from one start state.

    Args:
        model: Model
        pi: JointPolicy
        s0: Start state (flat index or tuple)
        horizon: Episode length
        uniforms: float array (n_episodes, horizon, n_agents)
        discounted: Weight step t by gamma^t instead of 1

    Returns:
        float array (n_episodes,)
    """
    s0 = model.space.resolve(s0)
    sampler = PolicySampler(model, pi)
    starts = np.full(uniforms.shape[0], s0, dtype=np.int64)
    return simulate_returns(sampler, starts, uniforms, model.gamma if discounted else 1.0)


def monte_carlo_return(model, pi, s0, horizon=DEFAULT_HORIZON, n_episodes=DEFAULT_EPISODES,
                       discounted=False, rng=None):
    """
    Monte-Carlo estimate of the episode return of a policy.

    Each episode sums (gamma^t if discounted else 1) * q(s_t, pi) over
    t < horizon, with the KL part of q taken analytically.

    Args:
        model: Model
        pi: JointPolicy
        s0: Start state
        horizon: Episode length (>= 1)
        n_episodes: Number of episodes (>= 1)
        discounted: Discount the per-step costs
        rng: numpy Generator (seed 0 when None)

    Returns:
        Tuple (mean, std) of the episode returns
    """
    if horizon < 1 or n_episodes < 1:
        raise ConfigError(f"horizon and n_episodes must be >= 1, got {horizon}, {n_episodes}")
    rng = np.random.default_rng(0) if rng is None else rng
    uniforms = rng.random((n_episodes, horizon, model.n_agents))
    return _summary(episode_returns(model, pi, s0, horizon, uniforms, discounted))


def sup_norm_diff(v1, v2):
    """
    Largest absolute entrywise difference between two vectors.

    Raises:
        ModelError: On a length mismatch
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise ModelError(f"Cannot compare vectors of shapes {v1.shape} and {v2.shape}")
    if v1.size == 0:
        return 0.0
    return float(np.max(np.abs(v1 - v2)))


def format_state(model, s):
    """Readable joint state label such as "(20,4)"."""
    return "(" + ",".join(str(x) for x in model.space.decode(model.space.resolve(s))) + ")"


def evaluate_policy(model, pi, start_states, horizon=DEFAULT_HORIZON, n_episodes=DEFAULT_EPISODES,
                    rng=None, label="policy", discounted=False, exact_values=None):
    """
    Monte-Carlo returns of one policy at several start states.

    Args:
        model: Model
        pi: JointPolicy
        start_states: Start states (flat indices or tuples)
        horizon: Episode length
        n_episodes: Episodes per start state
        rng: numpy Generator
        label: Value of the ``policy`` column
        discounted: Discount the per-step costs
        exact_values: Optional exact discounted value vector of ``pi``, added as
            column ``exact_value``

    Returns:
        DataFrame with RESULT_COLUMNS (plus ``exact_value`` when given)
    """
    rng = np.random.default_rng(0) if rng is None else rng
    records = []
    for s0 in start_states:
        mean, std = monte_carlo_return(model, pi, s0, horizon, n_episodes, discounted, rng)
        record = {
            "start_state": format_state(model, s0),
            "policy": label,
            "mean_return": mean,
            "std_return": std,
            "n_episodes": n_episodes,
            "horizon": horizon,
        }
        if exact_values is not None:
            record["exact_value"] = float(exact_values[model.space.resolve(s0)])
        records.append(record)
    columns = RESULT_COLUMNS + (["exact_value"] if exact_values is not None else [])
    return pd.DataFrame(records, columns=columns)


def compare_policies(model, pi_a, pi_b, start_states, horizon=DEFAULT_HORIZON,
                     n_episodes=DEFAULT_EPISODES, rng=None, labels=("learned", "baseline"),
                     discounted=False):
    """
    Paired Monte-Carlo comparison of two policies.

    For every start state both policies run on the same uniforms.

    Args:
        model: Model
        pi_a, pi_b: JointPolicies
        start_states: Start states
        horizon: Episode length
        n_episodes: Episodes per start state and policy
        rng: numpy Generator
        labels: Names written to the ``policy`` column
        discounted: Discount the per-step costs

    Returns:
        DataFrame with RESULT_COLUMNS, two rows per start state (a first)
    """
    if horizon < 1 or n_episodes < 1:
        raise ConfigError(f"horizon and n_episodes must be >= 1, got {horizon}, {n_episodes}")
    rng = np.random.default_rng(0) if rng is None else rng
    records = []
    for s0 in start_states:
        uniforms = rng.random((n_episodes, horizon, model.n_agents))
        for label, pi in zip(labels, (pi_a, pi_b)):
            mean, std = _summary(episode_returns(model, pi, s0, horizon, uniforms, discounted))
            records.append({
                "start_state": format_state(model, s0),
                "policy": label,
                "mean_return": mean,
                "std_return": std,
                "n_episodes": n_episodes,
                "horizon": horizon,
            })
    return pd.DataFrame(records, columns=RESULT_COLUMNS)
