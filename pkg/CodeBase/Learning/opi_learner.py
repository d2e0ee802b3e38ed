"""
OPI Learner - Synchronous and Asynchronous KL-Control Optimistic Policy Iteration

This module implements one iteration of each learning scheme:

    pi_{k+1}  = greedy Boltzmann policy of v_k            (over all joint states)
    v_{k+1}(s) = (1 - alpha_k) v_k(s) + alpha_k * G_k(s)    for s in D_k
    v_{k+1}(s) = v_k(s)                                     otherwise

where G_k(s) is an m-step TD rollout return (sampled mode) or (T^pi)^m v_k(s)
(expected mode). The synchronous scheme uses D_k = S; the asynchronous one
draws D distinct joint states uniformly at random every iteration. The step
size alpha_k is shared by all agents. Under the "harmonic" schedule it is
indexed by the global iteration counter; under "visits" each joint state uses
its own update count, so a state evaluated in a small async batch keeps a
larger step until it has been visited as often as under the sync scheme.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from CodeBase.Learning.rng_streams import RngLineage
from CodeBase.Learning.rollouts import PolicySampler, expected_m_step, rollout_batch
from CodeBase.Planning.operators import (
    apply_evaluation_operator,
    apply_optimal_operator,
    check_values,
    greedy_policy,
)
from CodeBase.errors import ConfigError, InitialValueError

logger = logging.getLogger("klc_opi.learner")

INIT_TOL = 1e-9


def learning_rate(k, lr_c0):
    """
    Harmonic step size alpha_k = lr_c0 / (lr_c0 + k); alpha_0 = 1.

    Args:
        k: Iteration index (>= 0)
        lr_c0: Positive constant

    Returns:
        float in (0, 1]
    """
    if k < 0 or not lr_c0 > 0:
        raise ConfigError(f"learning_rate needs k >= 0 and lr_c0 > 0, got k={k}, lr_c0={lr_c0}")
    return lr_c0 / (lr_c0 + k)


def step_size(k, config, visits=None):
    """
    Step size of iteration k under the configured schedule.

    Args:
        k: Global iteration index
        config: RunConfig
        visits: Per-state update counts of the states about to be updated;
            used by the "visits" schedule

    Returns:
        float, or a float array aligned with ``visits`` for the "visits" schedule
    """
    if config.lr_schedule == "unit":
        return 1.0
    if config.lr_schedule == "visits":
        if visits is None:
            raise ConfigError("lr_schedule 'visits' needs the per-state update counts")
        c0 = float(config.lr_c0)
        return c0 / (c0 + np.asarray(visits, dtype=float))
    return learning_rate(k, config.lr_c0)


def init_value(model, rule="upper_constant", v0=None):
    """
    Initial value estimate satisfying T V0 <= V0.

    ``upper_constant`` returns the constant max(0, max C) / (1 - gamma);
    ``explicit`` validates the given ``v0``.

    Args:
        model: Model
        rule: "upper_constant" or "explicit"
        v0: Initial vector for the explicit rule

    Returns:
        Value vector

    Raises:
        InitialValueError: If T V0 <= V0 fails; names the worst joint state
    """
    if rule == "upper_constant":
        v = np.full(model.n_states, max(0.0, float(np.max(model.cost))) / (1.0 - model.gamma))
    elif rule == "explicit":
        if v0 is None:
            raise ConfigError("init_rule 'explicit' needs an initial value vector")
        v = check_values(model, v0).copy()
    else:
        raise ConfigError(f"Unknown init rule {rule!r}")

    excess = apply_optimal_operator(model, v) - v
    worst = int(np.argmax(excess))
    if excess[worst] > INIT_TOL:
        raise InitialValueError(
            f"T V0 <= V0 fails at joint state {worst} {model.space.decode(worst)}: "
            f"(T V0 - V0)(s) = {excess[worst]:.6g}",
            state=worst, excess=float(excess[worst]),
        )
    return v


@dataclass
class StepInfo:
    """
    What one iteration did.

    Attributes:
        alpha: Step size used (mean over the batch under the "visits" schedule)
        sampled: Sorted joint states evaluated (D_k)
        targets: Return estimates (or exact targets) for ``sampled``
        policy: The greedy policy pi_{k+1}
    """

    alpha: float
    sampled: np.ndarray
    targets: np.ndarray
    policy: object = None

    @property
    def mean_return(self):
        return float(np.mean(self.targets)) if self.targets.size else float("nan")


@dataclass
class LearnerState:
    """
    State of one learner: the value estimate v_k, the counter k, the RNG lineage
    and how often every joint state has been updated.
    """

    v: np.ndarray
    k: int = 0
    rng_lineage: RngLineage = field(default_factory=lambda: RngLineage(0))
    last_step: StepInfo = None
    visits: np.ndarray = None

    def __post_init__(self):
        if self.visits is None:
            self.visits = np.zeros(np.shape(self.v)[0], dtype=np.int64)

    @classmethod
    def initial(cls, model, config, v0=None):
        """
        Fresh state at k = 0 with V0 from the configured init rule.
        """
        return cls(init_value(model, config.init_rule, v0), 0, RngLineage(int(config.seed)))


def _targets(model, config, state, pi, chosen):
    if config.mode == "expected":
        return expected_m_step(model, pi, state.v, config.m)[chosen]
    sampler = PolicySampler(model, pi, config.sampling_rule)
    block = state.rng_lineage.rollout_uniforms(state.k, model.n_states, config.m, model.n_agents)
    return rollout_batch(sampler, chosen, state.v, block[chosen], workers=config.workers)


def _advance(model, config, state, chosen):
    pi = greedy_policy(model, state.v)
    alpha = step_size(state.k, config, state.visits[chosen])
    targets = _targets(model, config, state, pi, chosen)

    v_next = state.v.copy()
    v_next[chosen] = (1.0 - alpha) * state.v[chosen] + alpha * targets
    visits = state.visits.copy()
    visits[chosen] += 1
    mean_alpha = float(np.mean(alpha))
    info = StepInfo(alpha=mean_alpha, sampled=chosen, targets=targets, policy=pi)
    logger.debug(
        "[TRAIN] k=%d alpha=%.4g |D|=%d mean target=%.6g",
        state.k, mean_alpha, chosen.size, info.mean_return,
    )
    return replace(state, v=v_next, k=state.k + 1, last_step=info, visits=visits)


def sync_iteration(state, model, config):
    """
    One KLC-OPI iteration: greedy improvement, then an update of every joint state.

    Args:
        state: LearnerState at iteration k
        model: Model
        config: RunConfig

    Returns:
        LearnerState at iteration k + 1 (``last_step`` describes the update)
    """
    return _advance(model, config, state, np.arange(model.n_states))


def draw_batch(n_states, batch_size, rng):
    """
    D distinct joint states drawn uniformly without replacement, sorted.
    """
    return np.sort(rng.choice(n_states, size=batch_size, replace=False))


def async_iteration(state, model, config, rng_stream=None):
    """
    One ASYNC-KLC-OPI iteration.

    Greedy improvement uses the whole of v_k; rollouts and updates are limited
    to a batch D_k of distinct joint states drawn uniformly; every other entry
    is copied unchanged.

    Args:
        state: LearnerState at iteration k
        model: Model
        config: RunConfig (D = None means all joint states)
        rng_stream: Generator for drawing D_k (lineage stream of iteration k when None)

    Returns:
        Tuple (LearnerState at k + 1, D_k as a sorted int array)

    Raises:
        ConfigError: If D is outside [1, |S|]
    """
    batch = config.batch_size(model.n_states)
    if not 1 <= batch <= model.n_states:
        raise ConfigError(f"D must lie in [1, {model.n_states}], got {batch}")
    rng = state.rng_lineage.selection_stream(state.k) if rng_stream is None else rng_stream
    chosen = draw_batch(model.n_states, batch, rng)
    new_state = _advance(model, config, state, chosen)
    return new_state, chosen


# --------------------------------------------------
# Diagnostics
# --------------------------------------------------
def async_noise(v, target, returns, selected, inclusion_prob):
    """
    Noise of the asynchronous update written in synchronous form.

    g = eps + (x / h - 1) * (-v + target + eps), eps = returns - target,
    where x marks the evaluated states and h is each state's inclusion
    probability (D / |S| for uniform batches). Averaged over the batch draw,
    g equals eps.

    Args:
        v: Current estimate v_k
        target: Exact targets (T^pi)^m v_k
        returns: Sampled returns for every joint state
        selected: Boolean mask of D_k
        inclusion_prob: Scalar or vector h(s)

    Returns:
        Vector g
    """
    eps = np.asarray(returns) - np.asarray(target)
    x = np.asarray(selected, dtype=float)
    return eps + (x / inclusion_prob - 1.0) * (-np.asarray(v) + target + eps)


def improvement_gap(model, v):
    """
    max_s (T v - v)(s); nonpositive once the estimate stopped overshooting.
    """
    return float(np.max(apply_optimal_operator(model, v) - v))


def policy_evaluation_bound(model, pi, v, m):
    """
    Both sides of (T^pi)^m v <= v + r (1 - gamma^m) / (1 - gamma), r = max_s (T^pi v - v)(s).

    The bound holds for either sign of r; for r >= 0 it is at most the
    horizon-free form v + r / (1 - gamma).

    Returns:
        Tuple (lhs, rhs) of value vectors
    """
    v = check_values(model, v)
    r = float(np.max(apply_evaluation_operator(model, pi, v) - v))
    lhs = expected_m_step(model, pi, v, m)
    rhs = v + r * (1.0 - model.gamma ** m) / (1.0 - model.gamma)
    return lhs, rhs
