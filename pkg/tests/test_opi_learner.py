import numpy as np
import pytest

from CodeBase.Environment.distribution import Distribution
from CodeBase.Environment.mdp_model import Model
from CodeBase.Learning.opi_learner import (
    LearnerState,
    async_iteration,
    async_noise,
    draw_batch,
    improvement_gap,
    init_value,
    learning_rate,
    policy_evaluation_bound,
    step_size,
    sync_iteration,
)
from CodeBase.Learning.rng_streams import RngLineage
from CodeBase.Learning.run_config import RunConfig
from CodeBase.Planning.exact_solver import value_iteration
from CodeBase.Planning.operators import apply_optimal_operator, greedy_policy
from CodeBase.Util.heatmap_utils import selection_counts
from CodeBase.errors import ConfigError, InitialValueError


# --------------------------------------------------
# Step sizes and configs
# --------------------------------------------------
def test_learning_rate_schedule():
    assert learning_rate(0, 10.0) == 1.0
    assert learning_rate(10, 10.0) == 0.5
    assert learning_rate(990, 10.0) == pytest.approx(0.01)
    assert learning_rate(0, 0.3) == 1.0
    with pytest.raises(ConfigError):
        learning_rate(-1, 10.0)


def test_unit_schedule():
    assert step_size(500, RunConfig(lr_schedule="unit")) == 1.0
    assert step_size(10, RunConfig(lr_c0=10.0)) == 0.5


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(D=20)
    with pytest.raises(ConfigError):
        RunConfig(scheme="async", D=0)
    with pytest.raises(ConfigError):
        RunConfig(m=0)
    with pytest.raises(ConfigError):
        RunConfig(mode="noisy")
    cfg = RunConfig.from_dict({"scheme": "async", "D": 20, "unrelated": 1})
    assert cfg.batch_size(625) == 20
    assert RunConfig().batch_size(625) == 625


def test_run_config_must_match_model(two_state_model):
    with pytest.raises(ConfigError):
        RunConfig(gamma=0.95).validate_for(two_state_model)
    with pytest.raises(ConfigError):
        RunConfig(gamma=0.5, scheme="async", D=3).validate_for(two_state_model)
    RunConfig(gamma=0.5, scheme="async", D=2).validate_for(two_state_model)


# --------------------------------------------------
# Initial values
# --------------------------------------------------
def test_upper_constant_staghare(staghare_model):
    v0 = init_value(staghare_model)
    assert np.all(v0 == 0.0)
    assert np.all(apply_optimal_operator(staghare_model, v0) <= v0)


def test_upper_constant_positive_costs():
    row = Distribution([0, 1], [0.5, 0.5])
    model = Model([2], [[row, row]], [2.0, -1.0], 0.5)
    v0 = init_value(model)
    assert np.allclose(v0, 4.0)
    assert np.allclose(apply_optimal_operator(model, v0), model.cost + 2.0)


def test_explicit_below_fixed_point_rejected(two_state_model):
    v_star = value_iteration(two_state_model, tol=1e-12).v_star
    with pytest.raises(InitialValueError) as info:
        init_value(two_state_model, "explicit", v_star - 1.0)
    assert info.value.state in (0, 1)
    assert info.value.excess == pytest.approx(0.5, abs=1e-9)
    assert np.array_equal(init_value(two_state_model, "explicit", v_star + 1.0), v_star + 1.0)
    with pytest.raises(ConfigError):
        init_value(two_state_model, "explicit")


# --------------------------------------------------
# Iterations
# --------------------------------------------------
def test_expected_unit_step_is_value_iteration_step(small_model):
    cfg = RunConfig(gamma=small_model.gamma, mode="expected", m=1)
    state = LearnerState.initial(small_model, cfg)
    nxt = sync_iteration(state, small_model, cfg)
    assert nxt.k == 1
    assert nxt.last_step.alpha == 1.0
    assert np.array_equal(nxt.v, apply_optimal_operator(small_model, state.v))


def test_sampled_zero_cost_stays_zero(zero_cost_model):
    for seed in (0, 1, 2):
        cfg = RunConfig(gamma=zero_cost_model.gamma, m=3, seed=seed)
        state = LearnerState.initial(zero_cost_model, cfg)
        assert np.allclose(sync_iteration(state, zero_cost_model, cfg).v, 0.0, atol=1e-12)


def test_expected_mode_keeps_fixed_point(two_state_model):
    v_star = value_iteration(two_state_model, tol=1e-13).v_star
    cfg = RunConfig(gamma=0.5, mode="expected", m=4, init_rule="explicit")
    state = LearnerState.initial(two_state_model, cfg, v_star)
    assert np.allclose(sync_iteration(state, two_state_model, cfg).v, v_star, atol=1e-9)


def test_async_full_batch_is_bit_identical_to_sync(small_model):
    n = small_model.n_states
    sync_cfg = RunConfig(gamma=small_model.gamma, m=5, seed=13)
    async_cfg = sync_cfg.with_updates(scheme="async", D=n)
    s_sync = LearnerState.initial(small_model, sync_cfg)
    s_async = LearnerState.initial(small_model, async_cfg)
    for _ in range(5):
        s_sync = sync_iteration(s_sync, small_model, sync_cfg)
        s_async, chosen = async_iteration(s_async, small_model, async_cfg)
        assert np.array_equal(chosen, np.arange(n))
        assert np.array_equal(s_sync.v, s_async.v)


def test_async_updates_only_batch(small_model):
    cfg = RunConfig(gamma=small_model.gamma, m=5, seed=3, scheme="async", D=7)
    state = LearnerState.initial(small_model, cfg)
    state = sync_iteration(state, small_model, cfg.with_updates(scheme="sync", D=None))
    nxt, chosen = async_iteration(state, small_model, cfg)
    assert chosen.size == 7 and np.all(np.diff(chosen) > 0)
    untouched = np.setdiff1d(np.arange(small_model.n_states), chosen)
    assert np.array_equal(nxt.v[untouched], state.v[untouched])
    assert nxt.last_step.sampled is chosen


def test_async_single_state_zero_cost(zero_cost_model):
    cfg = RunConfig(gamma=zero_cost_model.gamma, m=2, seed=0, scheme="async", D=1)
    nxt, chosen = async_iteration(LearnerState.initial(zero_cost_model, cfg), zero_cost_model, cfg)
    assert chosen.size == 1
    assert np.allclose(nxt.v, 0.0, atol=1e-12)


def test_async_rejects_oversized_batch(two_state_model):
    cfg = RunConfig(gamma=0.5, scheme="async", D=3)
    with pytest.raises(ConfigError):
        async_iteration(LearnerState(np.zeros(2)), two_state_model, cfg)


def test_batch_selection_is_uniform():
    lineage = RngLineage(21)
    n, d, iters = 625, 20, 10_000
    counts = selection_counts((draw_batch(n, d, lineage.selection_stream(k)) for k in range(iters)), n)
    freq = counts / iters
    assert counts.sum() == d * iters
    sigma = np.sqrt(0.032 * 0.968 / iters)
    assert np.max(np.abs(freq - 0.032)) <= 5 * sigma
    assert np.mean(np.abs(freq - 0.032) <= 0.003) >= 0.85


# --------------------------------------------------
# Diagnostics
# --------------------------------------------------
def test_async_noise_has_zero_mean():
    rng = np.random.default_rng(17)
    n, d, draws = 40, 10, 20_000
    v = rng.uniform(-3, 3, n)
    target = rng.uniform(-3, 3, n)
    returns = target + rng.normal(0, 0.5, n)
    eps = returns - target
    h = d / n
    total = np.zeros(n)
    for _ in range(draws):
        mask = np.zeros(n, dtype=bool)
        mask[rng.choice(n, size=d, replace=False)] = True
        total += async_noise(v, target, returns, mask, h)
    w = np.abs(-v + target + eps)
    se = np.sqrt((1 - h) / h) * w / np.sqrt(draws)
    assert np.all(np.abs(total / draws - eps) <= 5 * se + 1e-12)


def test_async_noise_full_batch_equals_rollout_noise():
    v = np.array([1.0, 2.0])
    target = np.array([0.5, 0.5])
    returns = np.array([0.7, 0.1])
    assert np.allclose(async_noise(v, target, returns, np.ones(2, dtype=bool), 1.0), returns - target)


def test_policy_evaluation_bound(make_random_model):
    rng = np.random.default_rng(31)
    for _ in range(25):
        model = make_random_model(rng)
        v = rng.uniform(-10, 10, model.n_states)
        pi = greedy_policy(model, v)
        for m in (1, 3, 8):
            lhs, rhs = policy_evaluation_bound(model, pi, v, m)
            assert np.all(lhs <= rhs + 1e-9)


def test_improvement_gap_at_upper_constant(staghare_model):
    assert improvement_gap(staghare_model, init_value(staghare_model)) <= 0.0


def test_policy_evaluation_bound_with_negative_r(two_state_model):
    # constant v above the fixed point: greedy is uncontrolled, T^pi v = (50, 51), r = -49
    v = np.array([100.0, 100.0])
    pi = greedy_policy(two_state_model, v)
    lhs, rhs = policy_evaluation_bound(two_state_model, pi, v, 1)
    assert np.allclose(lhs, [50.0, 51.0])
    assert np.allclose(rhs, [51.0, 51.0])
    lhs, rhs = policy_evaluation_bound(two_state_model, pi, v, 3)
    assert np.allclose(lhs, [12.875, 13.875])
    assert np.allclose(rhs, [14.25, 14.25])
    assert np.all(lhs <= rhs)


def test_policy_evaluation_bound_above_fixed_point(make_random_model):
    rng = np.random.default_rng(32)
    for _ in range(25):
        model = make_random_model(rng)
        v = value_iteration(model, tol=1e-10).v_star + rng.uniform(1.0, 50.0, model.n_states)
        pi = greedy_policy(model, v)
        for m in (1, 2, 5):
            lhs, rhs = policy_evaluation_bound(model, pi, v, m)
            assert np.all(lhs <= rhs + 1e-9)


# --------------------------------------------------
# Per-state step sizes
# --------------------------------------------------
def test_visits_schedule_step_sizes():
    cfg = RunConfig(lr_c0=10.0, lr_schedule="visits")
    assert np.allclose(step_size(99, cfg, [0, 10, 990]), [1.0, 0.5, 0.01])
    with pytest.raises(ConfigError):
        step_size(3, cfg)
    with pytest.raises(ConfigError):
        RunConfig(lr_schedule="per-state")


def test_visits_schedule_sync_matches_harmonic(small_model):
    harmonic = RunConfig(gamma=small_model.gamma, m=4, lr_c0=5.0, seed=2)
    visits = harmonic.with_updates(lr_schedule="visits")
    a = LearnerState.initial(small_model, harmonic)
    b = LearnerState.initial(small_model, visits)
    for _ in range(6):
        a = sync_iteration(a, small_model, harmonic)
        b = sync_iteration(b, small_model, visits)
        assert np.array_equal(a.v, b.v)
    assert np.all(b.visits == 6)


def test_visits_schedule_async_counts_updates(small_model):
    d, iters = 9, 12
    cfg = RunConfig(gamma=small_model.gamma, m=3, lr_c0=4.0, seed=5, scheme="async", D=d,
                    lr_schedule="visits")
    state = LearnerState.initial(small_model, cfg)
    for _ in range(iters):
        before = state.visits.copy()
        state, chosen = async_iteration(state, small_model, cfg)
        expected_alpha = np.mean(4.0 / (4.0 + before[chosen]))
        assert state.last_step.alpha == pytest.approx(expected_alpha)
        assert np.array_equal(state.visits[chosen], before[chosen] + 1)
    assert state.visits.sum() == d * iters


def test_run_config_coerces_numbers():
    cfg = RunConfig.from_dict({"K": "20", "lr_c0": "2.5", "m": 3.0})
    assert (cfg.K, cfg.lr_c0, cfg.m) == (20, 2.5, 3)
    for bad in ({"K": "abc"}, {"m": 2.5}, {"lr_c0": "fast"}, {"K": True}):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(bad)
