"""
Rollouts - m-Step TD Trajectories and Their Exact Expectation

This module simulates trajectories under a joint policy and computes the
discounted m-step return

    sum_{t<m} gamma^t q(s_t, pi) + gamma^m V(s_m)

where q(s, pi) = C(s) + KL(pi(. | s) || P_0(. | s)) is the analytic one-step
cost, so the only randomness in a return is the trajectory itself. Successors
are drawn by inverse-CDF lookup from pre-drawn uniforms, either from the joint
row (``joint``) or independently per agent from its marginal row
(``product_of_marginals``).

``expected_m_step`` is the noise-free counterpart (T^pi)^m V.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from CodeBase.Planning.operators import (
    apply_evaluation_operator,
    check_values,
    marginal_table,
    one_step_costs,
)
from CodeBase.errors import ConfigError

SAMPLING_RULES = ("joint", "product_of_marginals")


@dataclass
class RolloutSample:
    """
    One simulated trajectory.

    Attributes:
        start_state: Flat index of s_0
        visited: Joint states s_0, ..., s_m
        return_estimate: Discounted m-step return with the terminal value
    """

    start_state: int
    visited: list
    return_estimate: float


class PolicySampler:
    """
    Inverse-CDF lookup tables for one policy.

    Built once per iteration and shared read-only by every rollout of that
    iteration.
    """

    def __init__(self, model, pi, sampling_rule="joint"):
        if sampling_rule not in SAMPLING_RULES:
            raise ConfigError(f"Unknown sampling rule {sampling_rule!r}; use one of {SAMPLING_RULES}")
        self.model = model
        self.pi = pi
        self.sampling_rule = sampling_rule
        self.q = one_step_costs(model, pi)
        self.succ = model.kernel_table.succ
        if sampling_rule == "joint":
            self.cum = self._normalized_cumsum(pi.prob)
        else:
            self.marginal_cums = [
                self._normalized_cumsum(marginal_table(model, pi, i))
                for i in range(model.n_agents)
            ]

    @staticmethod
    def _normalized_cumsum(prob):
        cum = np.cumsum(prob, axis=1)
        return cum / cum[:, -1:]

    def step(self, states, u):
        """
        Draw successors for a batch of states.

        Args:
            states: int array (B,)
            u: float array (B, n_agents) of uniforms

        Returns:
            int array (B,) of successor joint states
        """
        if self.sampling_rule == "joint":
            cols = np.argmax(self.cum[states] > u[:, :1], axis=1)
            return self.succ[states, cols]
        parts = [
            np.argmax(cum[states] > u[:, i : i + 1], axis=1)
            for i, cum in enumerate(self.marginal_cums)
        ]
        return self.model.space.encode_many(np.stack(parts, axis=-1))


def simulate_returns(sampler, starts, uniforms, discount, terminal_values=None, keep_paths=False):
    """
    Simulate a batch of trajectories and accumulate their discounted costs.

    Args:
        sampler: PolicySampler
        starts: int array (B,) of start states
        uniforms: float array (B, T, n_agents); T is the trajectory length
        discount: Per-step discount (gamma, or 1.0 for undiscounted sums)
        terminal_values: Optional value vector added as discount^T V(s_T)
        keep_paths: Also return the visited states

    Returns:
        returns (B,), and visited (B, T + 1) when keep_paths
    """
    states = np.asarray(starts, dtype=np.int64)
    n_steps = uniforms.shape[1]
    returns = np.zeros(states.shape[0])
    weight = 1.0
    paths = [states] if keep_paths else None
    for t in range(n_steps):
        returns += weight * sampler.q[states]
        states = sampler.step(states, uniforms[:, t, :])
        weight *= discount
        if keep_paths:
            paths.append(states)
    if terminal_values is not None:
        returns += weight * terminal_values[states]
    if keep_paths:
        return returns, np.stack(paths, axis=1)
    return returns


def rollout(model, pi, s0, m, v, rng, sampling_rule="joint"):
    """
    One m-step TD rollout from s0.

    Args:
        model: Model
        pi: JointPolicy
        s0: Start state (flat index or tuple)
        m: Rollout length (>= 1)
        v: Value vector used for the terminal term
        rng: numpy Generator supplying the uniforms
        sampling_rule: "joint" or "product_of_marginals"

    Returns:
        RolloutSample
    """
    if m < 1:
        raise ConfigError(f"Rollout length m must be >= 1, got {m}")
    s0 = model.space.resolve(s0)
    v = check_values(model, v)
    sampler = PolicySampler(model, pi, sampling_rule)
    uniforms = rng.random((1, m, model.n_agents))
    returns, paths = simulate_returns(
        sampler, np.array([s0]), uniforms, model.gamma, terminal_values=v, keep_paths=True
    )
    return RolloutSample(s0, [int(x) for x in paths[0]], float(returns[0]))


def rollout_batch(sampler, starts, v, uniforms, workers=1):
    """
    m-step TD returns for many start states, optionally split over threads.

    Every start state consumes only its own row of ``uniforms``, and the batch
    is cut into contiguous chunks, so the result is identical for any number
    of workers.

    Args:
        sampler: PolicySampler for the current policy
        starts: int array (B,) of start states
        v: Value vector for the terminal term
        uniforms: float array (B, m, n_agents), row b feeding start b
        workers: Thread count (1 runs inline)

    Returns:
        float array (B,) of returns
    """
    starts = np.asarray(starts, dtype=np.int64)
    gamma = sampler.model.gamma
    if workers <= 1 or starts.size < 2 * workers:
        return simulate_returns(sampler, starts, uniforms, gamma, terminal_values=v)

    bounds = np.linspace(0, starts.size, workers + 1).astype(int)
    chunks = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    out = np.empty(starts.size)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            pool.submit(simulate_returns, sampler, starts[a:b], uniforms[a:b], gamma, v): (a, b)
            for a, b in chunks
        }
        for fut, (a, b) in futures.items():
            out[a:b] = fut.result()
    return out


def expected_m_step(model, pi, v, m):
    """
    Exact m-fold evaluation (T^pi)^m V, the noise-free target of a rollout.

    For a Boltzmann policy applied to the very vector it was built from, the
    first application equals the optimal operator, C - ln d(s; gamma), and is
    taken in that closed form.

    Args:
        model: Model
        pi: JointPolicy
        v: Value vector
        m: Number of applications (>= 1)

    Returns:
        Value vector
    """
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    w = check_values(model, v)
    start = 0
    if pi.log_normalizer is not None and pi.source_values is not None \
            and np.array_equal(pi.source_values, w):
        w = model.cost - pi.log_normalizer
        start = 1
    for _ in range(start, m):
        w = apply_evaluation_operator(model, pi, w)
    return w


def default_rollout_length(gamma):
    """
    Mean of a geom(1 - gamma) horizon, round(1 / (1 - gamma)); 20 at gamma = 0.95.
    """
    return max(1, int(round(1.0 / (1.0 - gamma))))
