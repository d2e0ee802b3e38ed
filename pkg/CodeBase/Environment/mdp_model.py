"""
MDP Model - Factored Multi-Agent MDP with KL Control Cost

This module provides the Model class, the representation every other part of
the toolkit consumes. A model holds the per-agent uncontrolled kernels
P_{i,0}(. | s), the intrinsic joint state cost C(s) and the discount factor.

The joint uncontrolled kernel P_0(s' | s) = prod_i P_{i,0}(s'_i | s) is never
stored densely. It is expanded once, lazily, into a padded table with one row
per joint state and one column per positive-probability successor (at most
prod_i max|supp P_{i,0}| columns), which is what the Bellman operators work on.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property, reduce

import numpy as np

from CodeBase.Environment.distribution import Distribution, ROW_SUM_TOL
from CodeBase.Environment.state_space import JointStateSpace
from CodeBase.errors import ModelError

logger = logging.getLogger("klc_opi.env")


class JointKernelTable:
    """
    Padded sparse storage of the joint uncontrolled kernel P_0.

    Row s lists the successors of s in increasing flat-index order. Rows shorter
    than the table width are padded with the row's own index, probability 0 and
    log-probability -inf, so padded entries never contribute to any sum.

    Attributes:
        succ: int64 array (|S|, L) of successor indices
        prob: float array (|S|, L) of P_0(succ | s)
        log_prob: float array (|S|, L) of ln P_0(succ | s), -inf on padding
        mask: bool array (|S|, L), True on real entries
        row_len: int array (|S|,) number of real entries per row
    """

    def __init__(self, rows):
        """
        Args:
            rows: List of (support, probs) array pairs, one per joint state
        """
        n_states = len(rows)
        width = max(len(sup) for sup, _ in rows)
        self.succ = np.repeat(np.arange(n_states, dtype=np.int64)[:, None], width, axis=1)
        self.prob = np.zeros((n_states, width))
        self.row_len = np.zeros(n_states, dtype=np.int64)
        for s, (sup, probs) in enumerate(rows):
            k = len(sup)
            self.succ[s, :k] = sup
            self.prob[s, :k] = probs
            self.row_len[s] = k
        self.mask = np.arange(width)[None, :] < self.row_len[:, None]
        with np.errstate(divide="ignore"):
            self.log_prob = np.where(self.mask, np.log(np.where(self.mask, self.prob, 1.0)), -np.inf)
        self.n_states = n_states
        self.width = width

    def row(self, s):
        """Distribution of row ``s`` (trusted, no re-validation)."""
        k = self.row_len[s]
        return Distribution(self.succ[s, :k].copy(), self.prob[s, :k].copy(), validate=False)


@dataclass
class AssumptionReport:
    """
    Outcome of one structural assumption check.

    Attributes:
        name: Short tag ("A1" .. "A4")
        title: Human-readable assumption name
        passed: Whether the check passed
        fatal: Whether a failure makes the model unusable
        detail: Free-text explanation
    """

    name: str
    title: str
    passed: bool
    fatal: bool = True
    detail: str = ""
    violations: list = field(default_factory=list)

    def line(self):
        """One-line report, e.g. "A2 REPORTED homogeneous uncontrolled kernels: ..."."""
        if self.passed:
            status = "PASS"
        else:
            status = "FAIL" if self.fatal else "REPORTED"
        return f"{self.name} {status} {self.title}: {self.detail}"


class Model:
    """
    Factored multi-agent MDP with KL control cost.

    The joint state space is the product of the agents' sub-state spaces. Agent
    i's uncontrolled kernel maps each joint state s to a Distribution over its
    own sub-states S_i. Actions never materialise: a policy re-weights P_0
    directly and pays the KL divergence from P_0 as control cost.
    """

    def __init__(self, space_sizes, uncontrolled_kernels, cost, gamma, name="model"):
        """
        Initialize and validate the model.

        Args:
            space_sizes: Sequence (|S_1|, ..., |S_n|)
            uncontrolled_kernels: One list per agent with |S| Distributions over S_i
            cost: Length-|S| sequence of intrinsic joint state costs C(s)
            gamma: Discount factor in [0, 1)
            name: Label used in logs and output files

        Raises:
            ModelError: If any invariant fails
        """
        self.space = JointStateSpace(space_sizes)
        self.n_agents = self.space.n_agents
        self.n_states = self.space.n_states
        self.spaces = self.space.spaces
        self.name = name

        self.cost = np.asarray(cost, dtype=float).copy()
        self.cost.setflags(write=False)
        self.gamma = float(gamma)
        self.uncontrolled_kernels = [list(rows) for rows in uncontrolled_kernels]

        self._validate()

    # --------------------------------------------------
    # Validation
    # --------------------------------------------------
    def _validate(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ModelError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.cost.shape != (self.n_states,):
            raise ModelError(
                f"Cost vector has length {self.cost.size}, expected {self.n_states}"
            )
        if not np.all(np.isfinite(self.cost)):
            raise ModelError("Cost vector has non-finite entries")
        if len(self.uncontrolled_kernels) != self.n_agents:
            raise ModelError(
                f"Expected {self.n_agents} per-agent kernels, got {len(self.uncontrolled_kernels)}"
            )
        for i, rows in enumerate(self.uncontrolled_kernels):
            if len(rows) != self.n_states:
                raise ModelError(
                    f"Kernel of agent {i} has {len(rows)} rows, expected {self.n_states}"
                )
            size_i = self.space.sizes[i]
            for s, row in enumerate(rows):
                if not isinstance(row, Distribution):
                    raise ModelError(f"Kernel row ({i}, {s}) is not a Distribution")
                if row.support[0] < 0 or row.support[-1] >= size_i:
                    raise ModelError(
                        f"Kernel row ({i}, {s}) targets sub-states outside [0, {size_i})"
                    )

    # --------------------------------------------------
    # Joint kernel
    # --------------------------------------------------
    @cached_property
    def kernel_table(self):
        """
        Padded table of the joint uncontrolled kernel P_0 (built on first use).
        """
        rows = []
        for s in range(self.n_states):
            agent_rows = [k[s] for k in self.uncontrolled_kernels]
            probs = reduce(np.multiply.outer, [r.probs for r in agent_rows]).ravel()
            grids = np.meshgrid(*[r.support for r in agent_rows], indexing="ij")
            succ = np.ravel_multi_index(tuple(g.ravel() for g in grids), self.space.sizes)
            probs = probs / probs.sum()
            rows.append((succ, probs))
        table = JointKernelTable(rows)
        logger.debug(
            "[MODEL] %s: joint kernel table %d x %d", self.name, table.n_states, table.width
        )
        return table

    def agent_row(self, agent, s):
        """
        Per-agent uncontrolled row P_{agent,0}(. | s).
        """
        return self.uncontrolled_kernels[agent][s]

    @cached_property
    def q_max(self):
        """
        Bound on the one-step cost of any support-respecting policy.

        max_s |C(s)| plus the largest KL any row can pay, max ln(1/P_0(s'|s))
        over positive-probability successors.
        """
        table = self.kernel_table
        worst_kl = float(np.max(-table.log_prob[table.mask]))
        return float(np.max(np.abs(self.cost))) + worst_kl

    @property
    def value_bound(self):
        """q_max / (1 - gamma), the bound on |V^pi| for support-respecting pi."""
        return self.q_max / (1.0 - self.gamma)

    def with_gamma(self, gamma):
        """
        Copy of this model with a different discount factor (kernels are shared).
        """
        return Model(self.space.sizes, self.uncontrolled_kernels, self.cost, gamma, name=self.name)

    # --------------------------------------------------
    # Structural assumptions
    # --------------------------------------------------
    def check_assumptions(self, batch_size=None, policy=None):
        """
        Report on the structural assumptions of the factored setting.

        A1 factored state, A2 homogeneous uncontrolled kernels (reported, never
        fatal), A3 support-zero feasibility of the policy, A4 feasibility of a
        batch of unique joint states.

        Args:
            batch_size: Optional async batch size D to check against |S|
            policy: Optional JointPolicy to check against the kernel support

        Returns:
            List of AssumptionReport
        """
        reports = []

        reports.append(AssumptionReport(
            "A1", "factored joint state",
            passed=self.n_states == int(np.prod(self.space.sizes))
            and len(self.uncontrolled_kernels) == self.n_agents,
            detail=f"{self.n_agents} agents, sizes {self.space.sizes}, |S| = {self.n_states}",
        ))

        violations = self.homogeneity_violations()
        if violations:
            s, i, j, x, p_i, p_j = violations[0]
            detail = (
                f"{len({v[0] for v in violations})} joint states differ, e.g. s={self.space.decode(s)}: "
                f"P_{i},0({x}|s)={p_i:.6g} vs P_{j},0({x}|s)={p_j:.6g}"
            )
            logger.warning("[MODEL] Assumption A2 does not hold literally: %s", detail)
        else:
            detail = "per-agent kernels agree on every shared sub-state"
        reports.append(AssumptionReport(
            "A2", "homogeneous uncontrolled kernels",
            passed=not violations, fatal=False, detail=detail, violations=violations,
        ))

        table = self.kernel_table
        if policy is None:
            a3_ok = bool(np.all(table.row_len >= 1))
            detail = "every P_0 row has a non-empty support; Boltzmann policies stay inside it"
        else:
            a3_ok, detail = policy.respects_support()
        reports.append(AssumptionReport(
            "A3", "policy is zero where P_0 is zero", passed=a3_ok, detail=detail,
        ))

        if batch_size is None:
            a4_ok, detail = True, f"any D in [1, {self.n_states}] can be drawn without replacement"
        else:
            a4_ok = 1 <= int(batch_size) <= self.n_states
            detail = f"D = {batch_size}, |S| = {self.n_states}"
        reports.append(AssumptionReport(
            "A4", "fixed-size batches of unique joint states", passed=a4_ok, detail=detail,
        ))
        return reports

    def homogeneity_violations(self, tol=ROW_SUM_TOL):
        """
        List joint states where two agents' uncontrolled rows disagree.

        Literal reading: P_{i,0}(x | s) == P_{j,0}(x | s) for every sub-state x
        and every agent pair whose sub-state spaces have the same size.

        Returns:
            List of tuples (s, i, j, x, p_i, p_j), one per disagreeing (s, i, j),
            reporting the first disagreeing sub-state x
        """
        out = []
        sizes = self.space.sizes
        for i in range(self.n_agents):
            for j in range(i + 1, self.n_agents):
                if sizes[i] != sizes[j]:
                    continue
                for s in range(self.n_states):
                    d_i = self.uncontrolled_kernels[i][s].to_dense(sizes[i])
                    d_j = self.uncontrolled_kernels[j][s].to_dense(sizes[j])
                    diff = np.flatnonzero(np.abs(d_i - d_j) > tol)
                    if diff.size:
                        x = int(diff[0])
                        out.append((s, i, j, x, float(d_i[x]), float(d_j[x])))
        return out

    def __repr__(self):
        return (
            f"Model(name={self.name!r}, sizes={self.space.sizes}, "
            f"|S|={self.n_states}, gamma={self.gamma})"
        )
