"""
Stag-Hare Factory - Gridworld Model Generation

This module builds the Stag-Hare hunting model from a GridSpec: the per-hunter
uncontrolled kernels (stay with stay_prob, otherwise move to one of the b
4-neighbours with (1 - stay_prob) / b each), the intrinsic joint state cost,
and the deterministic shortest-path baseline policy that walks every hunter
to the stag.
"""

import logging

import numpy as np

from CodeBase.Environment.distribution import Distribution
from CodeBase.Environment.grid_spec import GridSpec
from CodeBase.Environment.mdp_model import Model
from CodeBase.Environment.state_space import JointStateSpace
from CodeBase.Planning.bfs import BFSDistanceMap
from CodeBase.Planning.operators import JointPolicy
from CodeBase.errors import ModelError

logger = logging.getLogger("klc_opi.env")

DEFAULT_START_STATES = [(20, 4), (5, 12), (18, 14), (11, 13)]


def cell_row(spec, cell):
    """
    Uncontrolled move distribution of one hunter standing on ``cell``.

    Args:
        spec: GridSpec
        cell: Cell index

    Returns:
        Distribution over cells: stay_prob on ``cell``, the rest split evenly
        over its 4-neighbours
    """
    nbrs = spec.neighbors(cell)
    if not nbrs:
        return Distribution.point_mass(cell)
    move = (1.0 - spec.stay_prob) / len(nbrs)
    return Distribution.from_pairs([(cell, spec.stay_prob)] + [(n, move) for n in nbrs])


def cost(spec, s):
    """
    Intrinsic joint state cost.

    C(s) = hare_cost * #{hunters on a hare cell}
           + stag_cost * I{more than one hunter on a stag cell}

    Args:
        spec: GridSpec
        s: Tuple of hunter cells, or a flat joint state index

    Returns:
        float
    """
    if np.ndim(s) == 0:
        s = JointStateSpace([spec.n_cells] * spec.n_hunters).decode(int(s))
    on_hare = sum(1 for c in s if c in spec.hare_cells)
    on_stag = sum(1 for c in s if c in spec.stag_cells)
    return float(spec.hare_cost * on_hare + (spec.stag_cost if on_stag > 1 else 0.0))


def cost_vector(spec, space):
    """
    Vectorised ``cost`` over every joint state of ``space``.
    """
    cells = space.decode_many(np.arange(space.n_states))
    hare = np.isin(cells, sorted(spec.hare_cells)).sum(axis=1)
    stag = np.isin(cells, sorted(spec.stag_cells)).sum(axis=1)
    return spec.hare_cost * hare + np.where(stag > 1, spec.stag_cost, 0.0)


def build_model(spec=None):
    """
    Build the Stag-Hare model.

    Each hunter's uncontrolled row at joint state s depends only on that
    hunter's own cell.

    Args:
        spec: GridSpec (standard 5x5 grid when None)

    Returns:
        Model with n_hunters agents of n_cells sub-states each
    """
    spec = GridSpec.standard() if spec is None else spec
    space = JointStateSpace([spec.n_cells] * spec.n_hunters)
    cells = space.decode_many(np.arange(space.n_states))

    per_cell = [cell_row(spec, c) for c in range(spec.n_cells)]
    kernels = [
        [per_cell[c] for c in cells[:, i]]
        for i in range(spec.n_hunters)
    ]
    model = Model(
        space.sizes, kernels, cost_vector(spec, space), spec.gamma,
        name=f"staghare-{spec.width}x{spec.height}",
    )
    logger.info(
        "[STAGHARE] built %s: %d hunters, |S| = %d, gamma = %s",
        model.name, spec.n_hunters, model.n_states, spec.gamma,
    )
    return model


def deterministic_baseline(spec, model):
    """
    Deterministic shortest-path joint policy towards the stag.

    Every hunter takes one step along a shortest 4-connected path to the
    nearest stag cell (lowest-indexed cell on ties); hunters already on a stag
    cell stay. Each row is a point mass on the resulting joint successor,
    which always lies inside the support of P_0.

    Args:
        spec: GridSpec the model was built from
        model: Model from build_model(spec)

    Returns:
        JointPolicy

    Raises:
        ModelError: If the stag is unreachable from some cell
    """
    if not spec.stag_cells:
        raise ModelError("Grid has no stag cell to walk to")
    bfs = BFSDistanceMap(spec, spec.stag_cells)
    unreachable = [c for c in range(spec.n_cells) if c not in bfs.distances]
    if unreachable:
        raise ModelError(f"Stag unreachable from cells {unreachable}")

    step = np.array([bfs.next_step(c) for c in range(spec.n_cells)], dtype=np.int64)
    cells = model.space.decode_many(np.arange(model.n_states))
    targets = model.space.encode_many(step[cells])
    rows = [Distribution.point_mass(t) for t in targets]
    return JointPolicy.from_rows(model, rows)
