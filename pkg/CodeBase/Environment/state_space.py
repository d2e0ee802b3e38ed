"""
State Space - Joint State Index Conversion

This module provides the SubStateSpace and JointStateSpace classes which handle
conversions between joint state tuples (one sub-state per agent) and flat joint
state indices. Every vector in the toolkit (costs, values, kernel rows) is
indexed by the flat index, while environments and users think in tuples.
"""

from dataclasses import dataclass

import numpy as np

from CodeBase.errors import ModelError


@dataclass(frozen=True)
class SubStateSpace:
    """
    The sub-state space S_i controlled by a single agent.

    Attributes:
        agent_id: Index of the agent owning this space
        size: Number of sub-states |S_i| (at least 1)
    """

    agent_id: int
    size: int

    def __post_init__(self):
        if int(self.size) < 1:
            raise ModelError(
                f"Sub-state space of agent {self.agent_id} needs size >= 1, got {self.size}"
            )


class JointStateSpace:
    """
    Handles conversion between joint state tuples and flat joint state indices.

    The joint space is the Cartesian product S = S_1 x ... x S_n. The flat index
    is the mixed-radix encoding of the tuple with radices (|S_1|, ..., |S_n|),
    agent 0 being the most significant digit.

    Example:
        sizes = (25, 25)
        decode(13)  = (0, 13)
        encode((12, 12)) = 12 * 25 + 12 = 312
    """

    def __init__(self, sizes):
        """
        Initialize the joint space from per-agent sub-state counts.

        Args:
            sizes: Sequence of positive integers (|S_1|, ..., |S_n|)
        """
        if len(sizes) == 0:
            raise ModelError("A joint state space needs at least one agent")
        self.spaces = tuple(SubStateSpace(i, int(n)) for i, n in enumerate(sizes))
        self.sizes = tuple(sp.size for sp in self.spaces)
        self.n_agents = len(self.sizes)
        self.n_states = int(np.prod(self.sizes))

    def is_inside(self, flat_index):
        """
        Check if a flat index names a joint state of this space.

        Args:
            flat_index: Candidate flat index

        Returns:
            True if 0 <= flat_index < |S|, False otherwise
        """
        return 0 <= int(flat_index) < self.n_states

    def check_index(self, flat_index):
        """
        Validate a flat index and return it as an int.

        Raises:
            ModelError: If the index is outside [0, |S|)
        """
        if not self.is_inside(flat_index):
            raise ModelError(
                f"Joint state index {flat_index} out of range [0, {self.n_states})"
            )
        return int(flat_index)

    def encode(self, substates):
        """
        Convert a tuple of sub-states to the flat joint state index.

        Args:
            substates: Sequence (s_1, ..., s_n), one sub-state per agent

        Returns:
            Flat index in [0, |S|)

        Raises:
            ModelError: If the tuple has the wrong length or a sub-state is out of range
        """
        if len(substates) != self.n_agents:
            raise ModelError(
                f"Expected {self.n_agents} sub-states, got {len(substates)}"
            )
        for i, (s_i, n_i) in enumerate(zip(substates, self.sizes)):
            if not 0 <= int(s_i) < n_i:
                raise ModelError(f"Sub-state {s_i} of agent {i} out of range [0, {n_i})")
        return int(np.ravel_multi_index(tuple(int(x) for x in substates), self.sizes))

    def decode(self, flat_index):
        """
        Convert a flat joint state index back to its tuple of sub-states.

        Args:
            flat_index: Flat index in [0, |S|)

        Returns:
            Tuple (s_1, ..., s_n) of ints
        """
        flat_index = self.check_index(flat_index)
        return tuple(int(x) for x in np.unravel_index(flat_index, self.sizes))

    def decode_many(self, flat_indices):
        """
        Vectorised decode.

        Args:
            flat_indices: Integer array of any shape

        Returns:
            Integer array of shape flat_indices.shape + (n_agents,)
        """
        parts = np.unravel_index(np.asarray(flat_indices, dtype=np.int64), self.sizes)
        return np.stack(parts, axis=-1)

    def encode_many(self, substates):
        """
        Vectorised encode; the last axis of ``substates`` runs over agents.
        """
        substates = np.asarray(substates, dtype=np.int64)
        return np.ravel_multi_index(tuple(np.moveaxis(substates, -1, 0)), self.sizes)

    def resolve(self, state):
        """
        Accept either a flat index or a tuple of sub-states and return the flat index.
        """
        if isinstance(state, (tuple, list, np.ndarray)) and np.ndim(state) == 1:
            return self.encode(state)
        return self.check_index(state)

    def __repr__(self):
        return f"JointStateSpace(sizes={self.sizes})"
