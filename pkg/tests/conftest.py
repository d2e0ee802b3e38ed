import logging

import numpy as np
import pytest

from CodeBase.Environment.distribution import Distribution
from CodeBase.Environment.grid_spec import GridSpec
from CodeBase.Environment.mdp_model import Model
from CodeBase.Environment.staghare import build_model
from CodeBase.Planning.exact_solver import value_iteration
from CodeBase.Planning.operators import JointPolicy
from CodeBase.Util.log_utils import ROOT_LOGGER


def random_kernel_row(rng, size):
    """Random sparse distribution over range(size) with 1..size support points."""
    k = int(rng.integers(1, size + 1))
    support = np.sort(rng.choice(size, size=k, replace=False))
    probs = rng.dirichlet(np.ones(k))
    probs = np.maximum(probs, 1e-3)
    return Distribution(support, probs / probs.sum())


def random_model(rng, gamma=None, sizes=None, zero_cost=False):
    """Random factored model: 2 agents, 2-4 sub-states each, sparse kernels, C in [-10, 10]."""
    sizes = tuple(int(x) for x in rng.integers(2, 5, size=2)) if sizes is None else tuple(sizes)
    n_states = int(np.prod(sizes))
    kernels = [[random_kernel_row(rng, n) for _ in range(n_states)] for n in sizes]
    cost = np.zeros(n_states) if zero_cost else rng.uniform(-10.0, 10.0, size=n_states)
    gamma = float(rng.choice([0.5, 0.9, 0.95])) if gamma is None else gamma
    return Model(sizes, kernels, cost, gamma, name="random")


def random_policy(model, rng):
    """Random support-respecting joint policy."""
    table = model.kernel_table
    weights = rng.uniform(0.01, 1.0, size=table.prob.shape) * table.mask
    return JointPolicy(model, weights / weights.sum(axis=1, keepdims=True))


@pytest.fixture
def two_state_model():
    """One agent, two sub-states, uniform P_0 rows, C = (0, 1), gamma = 0.5."""
    row = Distribution([0, 1], [0.5, 0.5])
    return Model([2], [[row, row]], [0.0, 1.0], 0.5, name="two-state")


@pytest.fixture
def single_state_model():
    return Model([1], [[Distribution.point_mass(0)]], [-2.0], 0.5, name="single-state")


@pytest.fixture
def zero_cost_model():
    return random_model(np.random.default_rng(11), gamma=0.9, sizes=(2, 3), zero_cost=True)


@pytest.fixture
def make_random_model():
    return random_model


@pytest.fixture
def make_random_policy():
    return random_policy


@pytest.fixture(scope="session")
def standard_spec():
    return GridSpec.standard()


@pytest.fixture(scope="session")
def staghare_model(standard_spec):
    return build_model(standard_spec)


@pytest.fixture(scope="session")
def staghare_solution(staghare_model):
    return value_iteration(staghare_model, tol=1e-8)


@pytest.fixture(scope="session")
def small_spec():
    return GridSpec.small_variant()


@pytest.fixture(scope="session")
def small_model(small_spec):
    return build_model(small_spec)


@pytest.fixture(scope="session")
def small_solution(small_model):
    return value_iteration(small_model, tol=1e-10)


@pytest.fixture(autouse=True)
def detach_cli_log_handlers():
    """main() binds a handler to the current stderr; drop it once capture ends."""
    yield
    logger = logging.getLogger(ROOT_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.propagate = True
