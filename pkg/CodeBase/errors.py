"""
Errors - Exception Hierarchy and Exit Codes

This module collects the exceptions raised across the toolkit. Each one also
derives from the builtin exception a caller would naturally catch (ValueError
for bad input, RuntimeError for iteration failures), so plain ``except``
clauses keep working.
"""

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_FAILURE = 3


class KLCError(Exception):
    """Base class for every toolkit error."""


class ModelError(KLCError, ValueError):
    """Invalid distribution, model, grid specification or policy."""


class SupportViolationError(ModelError):
    """
    A distribution puts mass where the reference distribution has none.

    For a joint policy this means the policy moves to a joint state that the
    uncontrolled kernel can never reach, so its KL control cost is infinite.
    """

    def __init__(self, message, state=None, target=None):
        super().__init__(message)
        self.state = state
        self.target = target


class ConfigError(KLCError, ValueError):
    """Invalid run configuration, CLI flag combination or unreadable file."""


class InitialValueError(ConfigError):
    """An initial value function violates T V0 <= V0."""

    def __init__(self, message, state=None, excess=None):
        super().__init__(message)
        self.state = state
        self.excess = excess


class ConvergenceError(KLCError, RuntimeError):
    """An iterative solver ran out of iterations before reaching its tolerance."""

    def __init__(self, message, last_residual=None, iterations=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations


class SaturationError(KLCError, FloatingPointError):
    """exp(-V) over- or underflowed while forming a desirability vector."""
