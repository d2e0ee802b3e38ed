"""
Run Config - Settings of a Learning Run

This module provides the RunConfig dataclass. Defaults follow the Stag-Hare
experiment (gamma 0.95, m = 20, K = 3000); D = None means the synchronous
scheme evaluates every joint state.
"""

from dataclasses import asdict, dataclass, fields, replace

from CodeBase.errors import ConfigError

SCHEMES = ("sync", "async")
MODES = ("sampled", "expected")
SAMPLING_RULES = ("joint", "product_of_marginals")
INIT_RULES = ("upper_constant", "explicit")
LR_SCHEDULES = ("harmonic", "visits", "unit")


def coerce_number(name, value, kind):
    expected = "an integer" if kind is int else "a number"
    if isinstance(value, bool) or (kind is int and isinstance(value, float) and not value.is_integer()):
        raise ConfigError(f"{name} must be {expected}, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be {expected}, got {value!r}") from e


@dataclass(frozen=True)
class RunConfig:
    """
    Settings of one KLC-OPI / ASYNC-KLC-OPI run.

    Attributes:
        m: Rollout length
        gamma: Discount factor; must match the model's
        K: Number of iterations
        D: Async batch size (None = all joint states)
        lr_c0: Step size constant, alpha_k = lr_c0 / (lr_c0 + k)
        seed: Master seed
        mode: "sampled" rollouts or "expected" (noise-free) targets
        sampling_rule: "joint" or "product_of_marginals"
        init_rule: "upper_constant" or "explicit"
        scheme: "sync" or "async"
        lr_schedule: "harmonic" (alpha_k above), "visits" (lr_c0 / (lr_c0 + n_k(s))
            with n_k(s) the number of earlier updates of s) or "unit" (alpha = 1)
        workers: Rollout threads; results do not depend on it
        keep_values: Store v_k after every iteration
        record_sets: Store the sampled set of every iteration
    """

    m: int = 20
    gamma: float = 0.95
    K: int = 3000
    D: int = None
    lr_c0: float = 10.0
    seed: int = 0
    mode: str = "sampled"
    sampling_rule: str = "joint"
    init_rule: str = "upper_constant"
    scheme: str = "sync"
    lr_schedule: str = "harmonic"
    workers: int = 1
    keep_values: bool = False
    record_sets: bool = False

    def __post_init__(self):
        if int(self.m) < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if int(self.K) < 0:
            raise ConfigError(f"K must be >= 0, got {self.K}")
        if not self.lr_c0 > 0:
            raise ConfigError(f"lr_c0 must be positive, got {self.lr_c0}")
        if not 0.0 <= float(self.gamma) < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if int(self.workers) < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        for name, allowed in (
            ("mode", MODES), ("sampling_rule", SAMPLING_RULES), ("init_rule", INIT_RULES),
            ("scheme", SCHEMES), ("lr_schedule", LR_SCHEDULES),
        ):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.D is not None and int(self.D) < 1:
            raise ConfigError(f"D must be >= 1, got {self.D}")
        if self.scheme == "sync" and self.D is not None:
            raise ConfigError("D only applies to the async scheme")

    @classmethod
    def from_dict(cls, data):
        """
        Build a config from a dict, ignoring keys that are not RunConfig fields.

        Numeric fields are coerced (so "20" from a JSON string works).

        Raises:
            ConfigError: If a numeric field cannot be read as a number
        """
        kwargs = {}
        for f in fields(cls):
            if f.name not in data:
                continue
            value = data[f.name]
            if value is not None and f.type in (int, float, "int", "float"):
                value = coerce_number(f.name, value, int if f.type in (int, "int") else float)
            kwargs[f.name] = value
        return cls(**kwargs)

    def to_dict(self):
        return asdict(self)

    def with_updates(self, **changes):
        return replace(self, **changes)

    def batch_size(self, n_states):
        """
        Number of joint states evaluated per iteration.
        """
        return n_states if self.D is None else int(self.D)

    def validate_for(self, model):
        """
        Check the settings that depend on the model.

        Raises:
            ConfigError: If gamma differs from the model or D exceeds |S|
        """
        if abs(float(self.gamma) - model.gamma) > 1e-15:
            raise ConfigError(f"Config gamma {self.gamma} differs from model gamma {model.gamma}")
        if self.D is not None and not 1 <= int(self.D) <= model.n_states:
            raise ConfigError(f"D must lie in [1, {model.n_states}], got {self.D}")
