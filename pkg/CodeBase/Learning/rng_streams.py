"""
RNG Streams - Counter-Based Random Streams for Reproducible Runs

Every random draw of a run is derived from the master seed and a counter
(iteration, purpose), never from shared generator state. Rollout uniforms for
iteration k are drawn as one block with a row per joint state, so the numbers a
start state consumes do not depend on which other states are evaluated, in
which order, or on how many workers run them.
"""

from dataclasses import dataclass

import numpy as np

PURPOSE_ROLLOUT = 0
PURPOSE_SELECTION = 1
PURPOSE_EVALUATION = 2


@dataclass(frozen=True)
class RngLineage:
    """
    Master seed plus the derivation rule for per-iteration streams.

    Stream (k, purpose) is a Philox generator keyed by
    SeedSequence(seed, spawn_key=(k, purpose)).
    """

    seed: int

    def stream(self, k, purpose):
        """
        Independent generator for iteration ``k`` and ``purpose``.
        """
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(k), int(purpose)))
        return np.random.Generator(np.random.Philox(seq))

    def rollout_uniforms(self, k, n_states, m, n_agents):
        """
        Uniform block for iteration k: row s feeds the rollout started at s.

        Returns:
            float array (n_states, m, n_agents) in [0, 1)
        """
        return self.stream(k, PURPOSE_ROLLOUT).random((n_states, m, n_agents))

    def selection_stream(self, k):
        """Generator that draws the async batch D_k."""
        return self.stream(k, PURPOSE_SELECTION)

    def evaluation_stream(self, tag=0):
        """Generator for Monte-Carlo evaluation after training."""
        return self.stream(tag, PURPOSE_EVALUATION)
