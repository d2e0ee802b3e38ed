"""
Config Utilities - JSON Experiment Manifests

Experiment settings live in one JSON document. Command-line flags override the
file: any flag left at None keeps the file's value.
"""

import json

from CodeBase.errors import ConfigError


def load_config(path):
    """
    Read a JSON config file into a dict (empty dict when ``path`` is None).

    Raises:
        ConfigError: If the file cannot be read, is not JSON, or is not an object
    """
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")
    return data


def merge_overrides(config, overrides):
    """
    Overlay non-None override values on a config dict.

    Args:
        config: Base dict (not modified)
        overrides: Mapping of key -> value, None meaning "not given"

    Returns:
        New merged dict
    """
    merged = dict(config)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged
