"""
KL Bellman Operators - Policy and Value Operators for KL-Control MDPs

This module provides the exact operators of the KL-control setting: the joint
uncontrolled kernel row, the KL control cost, the one-step cost, the evaluation
operator T^pi, the optimal operator T, the Boltzmann greedy policy, marginal
policies and the desirability transform z = exp(-V).

All operators are pure functions over a Model, a JointPolicy and plain numpy
value vectors. Boltzmann weights and the normaliser d(s; gamma) are computed in
log space with a max shift (logsumexp), so large value magnitudes never
overflow.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.special import logsumexp, rel_entr

from CodeBase.Environment.distribution import Distribution, ROW_SUM_TOL
from CodeBase.errors import ModelError, SaturationError, SupportViolationError

logger = logging.getLogger("klc_opi.operators")

# exp(-v) leaves the normal float range beyond this magnitude
SATURATION_LIMIT = 700.0


# --------------------------------------------------
# Value functions
# --------------------------------------------------
def check_values(model, v):
    """
    Validate a value vector against a model.

    Args:
        model: Model the values are indexed by
        v: Array-like of length |S|

    Returns:
        float numpy array of length |S|

    Raises:
        ModelError: On a length mismatch or non-finite entries
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (model.n_states,):
        raise ModelError(f"Value vector has shape {v.shape}, expected ({model.n_states},)")
    if not np.all(np.isfinite(v)):
        raise ModelError("Value vector has non-finite entries")
    return v


@dataclass
class Desirability:
    """
    Cole-Hopf transform z = exp(-V) of a value function.

    Attributes:
        z: Positive vector over joint states
        saturated: Boolean mask of entries where exp(-V) left the float range
    """

    z: np.ndarray
    saturated: np.ndarray

    @property
    def any_saturated(self):
        return bool(np.any(self.saturated))


def desirability(v, strict=False):
    """
    Cole-Hopf transform of a value function, z(s) = exp(-v(s)).

    Policy weights never go through this transform (they are formed in log
    space); it exists for inspection and export. Entries with |v| > 700 are
    reported as saturated.

    Args:
        v: Value vector
        strict: Raise instead of warning when any entry saturates

    Returns:
        Desirability

    Raises:
        SaturationError: If ``strict`` and an entry saturates
    """
    v = np.asarray(v, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        z = np.exp(-v)
    saturated = (np.abs(v) > SATURATION_LIMIT) | ~np.isfinite(z) | (z == 0.0)
    if np.any(saturated):
        msg = f"exp(-V) saturates at {int(saturated.sum())} joint states (max |V| = {np.max(np.abs(v)):.4g})"
        if strict:
            raise SaturationError(msg)
        logger.warning("[OPERATORS] %s", msg)
    return Desirability(z=z, saturated=saturated)


# --------------------------------------------------
# Joint policies
# --------------------------------------------------
class JointPolicy:
    """
    Per-joint-state distribution over next joint states.

    Stored in the column layout of the model's joint kernel table, so
    prob[s, c] is the probability of moving to kernel_table.succ[s, c]. Mass
    outside the support of P_0(. | s) cannot be represented, which is the
    support restriction of the setting.

    A Boltzmann policy produced by greedy_policy also keeps the value vector it
    was built from and its log-normaliser ln d(s; gamma).
    """

    def __init__(self, model, prob, source_values=None, log_normalizer=None, validate=True):
        """
        Initialize from a probability table aligned with model.kernel_table.

        Args:
            model: Model whose kernel layout ``prob`` follows
            prob: float array (|S|, L)
            source_values: Value vector a Boltzmann policy was built from
            log_normalizer: ln d(s; gamma) per joint state for a Boltzmann policy
            validate: Check row sums and padding
        """
        self.model = model
        self.table = model.kernel_table
        self.prob = np.asarray(prob, dtype=float)
        self.source_values = source_values
        self.log_normalizer = log_normalizer
        if validate:
            self._validate()

    def _validate(self):
        if self.prob.shape != self.table.prob.shape:
            raise ModelError(
                f"Policy table has shape {self.prob.shape}, expected {self.table.prob.shape}"
            )
        if np.any(self.prob < 0.0) or not np.all(np.isfinite(self.prob)):
            raise ModelError("Policy has negative or non-finite probabilities")
        if np.any(self.prob[~self.table.mask] > 0.0):
            raise SupportViolationError("Policy puts mass on padding entries")
        sums = self.prob.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            s = int(bad[0])
            raise ModelError(f"Policy row {s} sums to {sums[s]!r}")

    # --------------------------------------------------
    # Constructors
    # --------------------------------------------------
    @classmethod
    def uncontrolled(cls, model):
        """The passive policy pi = P_0 (zero KL cost)."""
        return cls(model, model.kernel_table.prob.copy(), validate=False)

    @classmethod
    def from_rows(cls, model, rows):
        """
        Build a policy from one Distribution over joint states per joint state.

        Args:
            model: Model defining P_0
            rows: Sequence of |S| Distributions

        Returns:
            JointPolicy

        Raises:
            SupportViolationError: If a row puts mass where P_0(. | s) is zero
        """
        if len(rows) != model.n_states:
            raise ModelError(f"Expected {model.n_states} policy rows, got {len(rows)}")
        table = model.kernel_table
        prob = np.zeros_like(table.prob)
        for s, row in enumerate(rows):
            k = table.row_len[s]
            cols = np.searchsorted(table.succ[s, :k], row.support)
            cols = np.minimum(cols, k - 1)
            hit = table.succ[s, cols] == row.support
            if not np.all(hit):
                target = int(row.support[~hit][0])
                raise SupportViolationError(
                    f"Policy row {s} moves to joint state {target} outside the support of P_0",
                    state=s, target=target,
                )
            prob[s, cols] = row.probs
        return cls(model, prob)

    # --------------------------------------------------
    # Views
    # --------------------------------------------------
    def row(self, s):
        """
        Distribution pi(. | s) over joint states (positive entries only).
        """
        p = self.prob[s]
        keep = p > 0.0
        return Distribution(self.table.succ[s][keep], p[keep], validate=False)

    @property
    def rows(self):
        """List of all rows as Distributions."""
        return [self.row(s) for s in range(self.model.n_states)]

    def kl_terms(self):
        """
        KL(pi(. | s) || P_0(. | s)) for every joint state.
        """
        return rel_entr(self.prob, self.table.prob).sum(axis=1)

    def respects_support(self):
        """
        Check that the policy puts no mass where P_0 is zero.

        Returns:
            Tuple (passed, detail)
        """
        outside = (self.prob > 0.0) & (~self.table.mask | (self.table.prob <= 0.0))
        if np.any(outside):
            s = int(np.flatnonzero(outside.any(axis=1))[0])
            return False, f"row {s} has mass outside the support of P_0"
        return True, "every policy row lies inside the support of P_0"

    def is_deterministic(self):
        """True if every row is a point mass."""
        return bool(np.all(np.max(self.prob, axis=1) == 1.0))

    def to_sparse(self):
        """
        The policy as a |S| x |S| scipy CSR matrix.
        """
        n = self.model.n_states
        rows = np.repeat(np.arange(n), self.table.width)
        return csr_matrix(
            (self.prob.ravel(), (rows, self.table.succ.ravel())), shape=(n, n)
        )

    def __repr__(self):
        kind = "boltzmann" if self.source_values is not None else "explicit"
        return f"JointPolicy({kind}, |S|={self.model.n_states})"


# --------------------------------------------------
# Operators
# --------------------------------------------------
def joint_kernel_row(model, s):
    """
    Joint uncontrolled row P_0(. | s) = prod_i P_{i,0}(s'_i | s).

    Args:
        model: Model
        s: Flat joint state index or tuple of sub-states

    Returns:
        Distribution over joint states; its support is the Cartesian product of
        the per-agent supports

    Raises:
        ModelError: If ``s`` is out of range
    """
    return model.kernel_table.row(model.space.resolve(s))


def kl_divergence(p, q):
    """
    KL divergence KL(p || q) in nats between two sparse distributions.

    Args:
        p: Distribution
        q: Distribution whose support contains the support of ``p``

    Returns:
        Nonnegative float, exactly 0.0 when p and q coincide

    Raises:
        SupportViolationError: If p puts mass outside the support of q
    """
    inside = np.isin(p.support, q.support)
    if not np.all(inside):
        target = int(p.support[~inside][0])
        raise SupportViolationError(
            f"KL undefined: p puts mass on {target}, outside the support of q", target=target
        )
    if np.array_equal(p.support, q.support) and np.array_equal(p.probs, q.probs):
        return 0.0
    q_probs = q.probs[np.searchsorted(q.support, p.support)]
    return max(float(rel_entr(p.probs, q_probs).sum()), 0.0)


def one_step_cost(model, s, pi_row):
    """
    One-step cost q(s, pi) = C(s) + KL(pi(. | s) || P_0(. | s)).

    Raises:
        SupportViolationError: Propagated from kl_divergence
    """
    s = model.space.resolve(s)
    return float(model.cost[s]) + kl_divergence(pi_row, joint_kernel_row(model, s))


def one_step_costs(model, pi):
    """
    Vector of one-step costs q(s, pi) over all joint states.
    """
    return model.cost + pi.kl_terms()


def _check_policy(model, pi):
    # a policy from another model object is accepted only on the same successor layout
    if pi.model is model:
        return
    table = model.kernel_table
    if (
        pi.prob.shape != table.prob.shape
        or not np.array_equal(pi.table.succ, table.succ)
        or not np.array_equal(pi.table.mask, table.mask)
    ):
        raise ModelError("Policy was built for a model with a different kernel layout")


def apply_evaluation_operator(model, pi, v):
    """
    KL evaluation Bellman operator.

    (T^pi V)(s) = C(s) + KL(pi(. | s) || P_0(. | s)) + gamma * sum_s' pi(s' | s) V(s')

    Args:
        model: Model
        pi: JointPolicy
        v: Value vector

    Returns:
        New value vector

    Raises:
        ModelError: On a dimension mismatch
    """
    _check_policy(model, pi)
    v = check_values(model, v)
    table = model.kernel_table
    future = np.sum(pi.prob * v[table.succ], axis=1)
    return one_step_costs(model, pi) + model.gamma * future


def _boltzmann_logits(model, v):
    table = model.kernel_table
    return table.log_prob - model.gamma * v[table.succ]


def apply_optimal_operator(model, v):
    """
    KL optimal Bellman operator in closed form.

    (T V)(s) = C(s) - ln sum_s' P_0(s' | s) exp(-gamma V(s'))

    Args:
        model: Model
        v: Value vector

    Returns:
        New value vector
    """
    v = check_values(model, v)
    return model.cost - logsumexp(_boltzmann_logits(model, v), axis=1)


def greedy_policy(model, v):
    """
    Boltzmann greedy policy for a value vector.

    pi(s' | s) = P_0(s' | s) exp(-gamma V(s')) / d(s; gamma), restricted to the
    support of P_0(. | s) and renormalised once.

    Args:
        model: Model
        v: Value vector

    Returns:
        JointPolicy carrying ``v`` and ln d(s; gamma)
    """
    v = check_values(model, v)
    logits = _boltzmann_logits(model, v)
    log_d = logsumexp(logits, axis=1)
    prob = np.exp(logits - log_d[:, None])
    prob /= prob.sum(axis=1, keepdims=True)
    return JointPolicy(model, prob, source_values=v.copy(), log_normalizer=log_d, validate=False)


def marginal_table(model, pi, agent):
    """
    Dense marginal policy of one agent.

    Args:
        model: Model
        pi: JointPolicy
        agent: Agent index

    Returns:
        float array (|S|, |S_agent|); row s is the marginal over the agent's next sub-state
    """
    if not 0 <= int(agent) < model.n_agents:
        raise ModelError(f"Agent index {agent} out of range [0, {model.n_agents})")
    table = model.kernel_table
    sub = model.space.decode_many(table.succ)[..., agent]
    out = np.zeros((model.n_states, model.space.sizes[agent]))
    rows = np.broadcast_to(np.arange(model.n_states)[:, None], sub.shape)
    np.add.at(out, (rows, sub), pi.prob)
    return out


def marginal_policy(model, pi, agent):
    """
    Marginal policy of one agent: the joint row summed over every other agent's
    next sub-state.

    Args:
        model: Model
        pi: JointPolicy
        agent: Agent index in [0, n)

    Returns:
        List of |S| Distributions over S_agent

    Raises:
        ModelError: If ``agent`` is out of range
    """
    dense = marginal_table(model, pi, agent)
    out = []
    for row in dense:
        support = np.flatnonzero(row > 0.0)
        probs = row[support]
        out.append(Distribution(support, probs / probs.sum()))
    return out
