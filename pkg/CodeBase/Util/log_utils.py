"""
Logging Utilities - Verbosity from the Environment

Library modules log through loggers under the ``klc_opi`` namespace and never
configure handlers themselves. Entry points call ``configure_logging`` once;
the level comes from the KLC_OPI_LOG environment variable.
"""

import logging
import os
import sys

ENV_VAR = "KLC_OPI_LOG"
ROOT_LOGGER = "klc_opi"
DEFAULT_LEVEL = logging.WARNING
FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


def resolve_level(value):
    """
    Turn a level name or number ("debug", "INFO", "10") into a logging level.

    Unknown values fall back to WARNING.
    """
    if value is None or str(value).strip() == "":
        return DEFAULT_LEVEL
    value = str(value).strip()
    if value.isdigit():
        return int(value)
    level = logging.getLevelName(value.upper())
    return level if isinstance(level, int) else DEFAULT_LEVEL


def configure_logging(level=None, stream=None):
    """
    Install a single stream handler on the ``klc_opi`` logger.

    Args:
        level: Explicit level; KLC_OPI_LOG is read when None
        stream: Output stream (stderr by default)

    Returns:
        The configured logger
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(resolve_level(os.environ.get(ENV_VAR)) if level is None else resolve_level(level))
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(logging.Formatter(FORMAT))
    logger.addHandler(handler)
    logger.propagate = False
    return logger
