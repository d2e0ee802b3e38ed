"""
Distribution - Sparse Probability Vectors

This module provides the Distribution class, a probability vector over a finite
index set that stores only its support. Kernel rows, per-agent kernel rows and
policy rows are all Distributions.
"""

import numpy as np

from CodeBase.errors import ModelError

ROW_SUM_TOL = 1e-12


class Distribution:
    """
    Sparse probability vector with an explicit, strictly increasing support.

    Invariants checked at construction:
        - every probability is > 0
        - probabilities sum to 1 within 1e-12
        - support indices are strictly increasing (no duplicates)
    """

    __slots__ = ("support", "probs")

    def __init__(self, support, probs, validate=True):
        """
        Initialize the distribution.

        Args:
            support: Sequence of target indices, strictly increasing
            probs: Positive reals aligned with ``support``
            validate: Skip the invariant checks when False (trusted internal callers)
        """
        self.support = np.asarray(support, dtype=np.int64)
        self.probs = np.asarray(probs, dtype=float)
        if validate:
            self._validate()

    def _validate(self):
        if self.support.ndim != 1 or self.support.shape != self.probs.shape:
            raise ModelError("Distribution support and probs must be 1-D and aligned")
        if self.support.size == 0:
            raise ModelError("Distribution has an empty support")
        if np.any(np.diff(self.support) <= 0):
            raise ModelError(f"Distribution support not strictly increasing: {self.support}")
        if not np.all(np.isfinite(self.probs)) or np.any(self.probs <= 0.0):
            raise ModelError(f"Distribution has non-positive probabilities: {self.probs}")
        total = float(self.probs.sum())
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise ModelError(f"Distribution sums to {total!r}, not 1")

    @classmethod
    def from_pairs(cls, pairs, normalize=False):
        """
        Build a distribution from (index, probability) pairs in any order.

        Entries with zero probability are dropped, duplicate indices are summed.

        Args:
            pairs: Iterable of (index, probability)
            normalize: Renormalise once before validation

        Returns:
            Distribution
        """
        acc = {}
        for idx, p in pairs:
            if p < 0:
                raise ModelError(f"Negative probability {p} for index {idx}")
            if p > 0:
                acc[int(idx)] = acc.get(int(idx), 0.0) + float(p)
        support = np.array(sorted(acc), dtype=np.int64)
        probs = np.array([acc[i] for i in support], dtype=float)
        if normalize and probs.size:
            probs = probs / probs.sum()
        return cls(support, probs)

    @classmethod
    def point_mass(cls, index):
        """Distribution with all mass on ``index``."""
        return cls([int(index)], [1.0])

    @classmethod
    def uniform(cls, indices):
        """Uniform distribution over the given distinct indices."""
        support = np.unique(np.asarray(indices, dtype=np.int64))
        return cls(support, np.full(support.size, 1.0 / support.size))

    def prob(self, index):
        """
        Probability of ``index`` (0.0 outside the support).
        """
        pos = np.searchsorted(self.support, index)
        if pos < self.support.size and self.support[pos] == index:
            return float(self.probs[pos])
        return 0.0

    def as_dict(self):
        """Mapping index -> probability."""
        return {int(i): float(p) for i, p in zip(self.support, self.probs)}

    def pairs(self):
        """List of (index, probability) tuples, sorted by index."""
        return [(int(i), float(p)) for i, p in zip(self.support, self.probs)]

    def to_dense(self, size):
        """
        Dense probability vector of length ``size``.
        """
        dense = np.zeros(size)
        dense[self.support] = self.probs
        return dense

    def is_close(self, other, tol=ROW_SUM_TOL):
        """
        Check if two distributions have the same support and probabilities within tol.
        """
        return (
            np.array_equal(self.support, other.support)
            and bool(np.all(np.abs(self.probs - other.probs) <= tol))
        )

    def __len__(self):
        return int(self.support.size)

    def __repr__(self):
        return f"Distribution({self.as_dict()})"
