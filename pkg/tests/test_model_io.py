import json

import numpy as np
import pytest

from CodeBase.Environment.model_io import (
    load_model,
    load_policy,
    load_values,
    save_model,
    save_policy,
    save_values,
)
from CodeBase.Environment.staghare import deterministic_baseline
from CodeBase.Planning.operators import greedy_policy
from CodeBase.Util.config_utils import load_config, merge_overrides
from CodeBase.Util.csv_utils import read_csv_with_header
from CodeBase.errors import ConfigError, ModelError


def test_model_file_keeps_kernels_and_costs(tmp_path, small_model):
    path = tmp_path / "model.json"
    save_model(small_model, path)
    data = json.loads(path.read_text())
    assert set(data) >= {"n_agents", "space_sizes", "gamma", "cost", "kernels"}

    loaded = load_model(path)
    assert loaded.space.sizes == small_model.space.sizes
    assert loaded.gamma == small_model.gamma
    assert np.array_equal(loaded.cost, small_model.cost)
    assert np.array_equal(loaded.kernel_table.prob, small_model.kernel_table.prob)


def test_model_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_model(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_agents": 2, "space_sizes": [2]}))
    with pytest.raises(ModelError):
        load_model(bad)


def test_policy_file(tmp_path, small_spec, small_model):
    pi = deterministic_baseline(small_spec, small_model)
    path = tmp_path / "pi.json"
    save_policy(small_model, pi, path, provenance={"seed": 1})
    loaded = load_policy(small_model, path)
    assert np.array_equal(loaded.prob, pi.prob)
    assert json.loads(path.read_text())["provenance"] == {"seed": 1}


def test_boltzmann_policy_file(tmp_path, small_model, small_solution):
    path = tmp_path / "pistar.json"
    save_policy(small_model, small_solution.pi_star, path)
    loaded = load_policy(small_model, path)
    assert np.allclose(loaded.prob, small_solution.pi_star.prob, atol=1e-15)


def test_value_file_has_provenance_line(tmp_path, two_state_model):
    path = tmp_path / "v.csv"
    save_values([0.5, 1.5], path, provenance={"command": "solve"})
    lines = path.read_bytes().split(b"\n")
    assert lines[0].startswith(b"# config: ")
    assert lines[1] == b"state_index,v_star"
    assert b"\r" not in path.read_bytes()
    assert np.array_equal(load_values(two_state_model, path), [0.5, 1.5])
    assert list(read_csv_with_header(path).columns) == ["state_index", "v_star"]


def test_policy_from_values_round_trip(tmp_path, small_model, small_solution):
    path = tmp_path / "v.csv"
    save_values(small_solution.v_star, path)
    v = load_values(small_model, path)
    assert np.allclose(greedy_policy(small_model, v).prob, small_solution.pi_star.prob, atol=1e-12)


def test_config_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"m": 20, "seed": 3}))
    merged = merge_overrides(load_config(path), {"m": 5, "seed": None})
    assert merged == {"m": 5, "seed": 3}
    assert load_config(None) == {}
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(path)
