"""
Model I/O - Structured Text Serialisation

This module reads and writes models, policies and value vectors. Models and
policies are JSON documents; value vectors are CSV files written through
pandas. Probabilities are written with repr precision (17 significant digits).

Model document fields: n_agents, space_sizes, gamma, cost (flat array),
kernels (per agent, per joint state: list of [substate, prob] pairs).
"""

import json
import logging

import numpy as np
import pandas as pd

from CodeBase.Environment.distribution import Distribution
from CodeBase.Environment.mdp_model import Model
from CodeBase.Planning.operators import JointPolicy, check_values
from CodeBase.Util.csv_utils import read_csv_with_header, write_csv_with_header
from CodeBase.errors import ConfigError, ModelError

logger = logging.getLogger("klc_opi.io")


def model_to_dict(model):
    """
    JSON-compatible dict of a model.
    """
    return {
        "name": model.name,
        "n_agents": model.n_agents,
        "space_sizes": list(model.space.sizes),
        "gamma": model.gamma,
        "cost": [float(c) for c in model.cost],
        "kernels": [[row.pairs() for row in rows] for rows in model.uncontrolled_kernels],
    }


def model_from_dict(data):
    """
    Rebuild a model from ``model_to_dict`` output.

    Raises:
        ModelError: On missing fields or inconsistent content
    """
    try:
        sizes = data["space_sizes"]
        if int(data["n_agents"]) != len(sizes):
            raise ModelError(
                f"n_agents = {data['n_agents']} but {len(sizes)} space sizes given"
            )
        kernels = [
            [Distribution.from_pairs(pairs) for pairs in rows]
            for rows in data["kernels"]
        ]
        return Model(sizes, kernels, data["cost"], data["gamma"], name=data.get("name", "model"))
    except KeyError as e:
        raise ModelError(f"Model document lacks field {e}") from e


def save_model(model, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(model_to_dict(model), f)
    logger.info("[IO] wrote model %s to %s", model.name, path)


def load_model(path):
    """
    Read a model JSON document.

    Raises:
        ConfigError: If the file cannot be read or parsed
        ModelError: If the content is not a valid model
    """
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read model file {path}: {e}") from e
    return model_from_dict(data)


def policy_to_dict(model, pi, provenance=None):
    """
    JSON-compatible dict of a joint policy: per joint state, [successor, prob] pairs.
    """
    return {
        "model": model.name,
        "n_states": model.n_states,
        "provenance": provenance or {},
        "rows": [pi.row(s).pairs() for s in range(model.n_states)],
    }


def save_policy(model, pi, path, provenance=None):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(policy_to_dict(model, pi, provenance), f)
    logger.info("[IO] wrote policy to %s", path)


def load_policy(model, path):
    """
    Read a policy JSON document written by ``save_policy``.

    Raises:
        ConfigError: If the file cannot be read
        ModelError: If the policy does not fit the model
    """
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read policy file {path}: {e}") from e
    if int(data.get("n_states", -1)) != model.n_states:
        raise ModelError(
            f"Policy file has {data.get('n_states')} states, model has {model.n_states}"
        )
    rows = [Distribution.from_pairs(pairs, normalize=True) for pairs in data["rows"]]
    return JointPolicy.from_rows(model, rows)


def save_values(values, path, column="v_star", provenance=None):
    """
    Write a value vector as CSV with columns ``state_index,<column>``.
    """
    df = pd.DataFrame({"state_index": np.arange(len(values)), column: np.asarray(values, dtype=float)})
    write_csv_with_header(df, path, provenance)


def load_values(model, path):
    """
    Read a value CSV (second column holds the values).
    """
    try:
        df = read_csv_with_header(path)
    except OSError as e:
        raise ConfigError(f"Cannot read value file {path}: {e}") from e
    df = df.sort_values("state_index")
    return check_values(model, df.iloc[:, 1].to_numpy(dtype=float))
