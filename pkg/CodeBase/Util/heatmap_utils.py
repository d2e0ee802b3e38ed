"""
Heatmap Utilities - Selection Count Maps

This module converts the sparse record of which joint states were evaluated
(one sampled set per iteration) into a dense count array.
"""

import numpy as np


def selection_counts(sampled_sets, n_states):
    """
    Count how often each joint state was evaluated.

    Args:
        sampled_sets: Iterable of integer arrays (one per iteration)
        n_states: Number of joint states |S|

    Returns:
        int64 numpy array of length n_states
    """
    counts = np.zeros(n_states, dtype=np.int64)
    for chosen in sampled_sets:
        np.add.at(counts, np.asarray(chosen, dtype=np.int64), 1)
    return counts
