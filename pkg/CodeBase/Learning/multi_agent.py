"""
Multi-Agent Runs - One Learner Instance per Agent

Every agent runs the scheme on its own copy of the value estimate. With the
same initial estimate, the same step sizes and the same seed, all agents
compute the same joint policy and the same estimates at every iteration; each
agent then acts through its marginal of that joint policy.
"""

import logging

import numpy as np

from CodeBase.Planning.operators import greedy_policy, marginal_policy
from CodeBase.training_system import TrainingSystem

logger = logging.getLogger("klc_opi.learner")


def run_independent_agents(model, config, v_star=None, v0=None):
    """
    Run one learner instance per agent of the model.

    Args:
        model: Model
        config: RunConfig, shared by all agents (keep_values is forced on)
        v_star: Optional exact solution for the trace
        v0: Shared initial vector for init_rule "explicit"

    Returns:
        List of RunResult, one per agent
    """
    cfg = config.with_updates(keep_values=True)
    results = []
    for agent in range(model.n_agents):
        logger.info("[TRAIN] starting learner of agent %d", agent)
        results.append(TrainingSystem(model, cfg, v_star=v_star, v0=v0).run())
    return results


def agents_agree(results):
    """
    True if every agent produced bit-identical estimates at every iteration.
    """
    if not results:
        return True
    first = results[0].history
    for other in results[1:]:
        if len(other.history) != len(first):
            return False
        if not all(np.array_equal(a, b) for a, b in zip(first, other.history)):
            return False
    return True


def agent_controls(model, results):
    """
    Marginal policy each agent acts with after its run.

    Args:
        model: Model
        results: Output of run_independent_agents

    Returns:
        List (per agent) of |S| Distributions over that agent's sub-states
    """
    return [
        marginal_policy(model, greedy_policy(model, result.v_final), agent)
        for agent, result in enumerate(results)
    ]
