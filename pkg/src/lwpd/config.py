"""Experiment configuration: a flat YAML mapping with a fixed set of keys."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .codebook import is_power_of_two
from .metrics import atomic_write

SCHEMES = ("lwpd", "gc", "kac", "centralized")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scheme: str
    # code / cluster
    n: int = 8
    k: int = 4
    t: int = 2
    K: int | None = None
    s_gc: int | None = None
    seed: int = 0
    # delay model
    base: float = 1.0
    rate: float = 2.0
    straggler_prob: float = 0.0
    straggler_factor: float = 1.0
    downlink: float = 0.0
    uplink: float = 0.0
    # model
    family: str = "logistic"
    hidden: list[int] = field(default_factory=list)
    mode: str = "2d"
    # dataset
    num_classes: int = 4
    num_components: int = 8
    dim: int = 20
    n_records: int = 20000
    spread: float = 3.0
    data_seed: int | None = None
    data_csv: str | None = None
    # optimisation / run control
    lr: float = 0.1
    time_budget: float = 100.0
    eval_interval: float = 5.0
    max_updates: int = 0
    eval_every_updates: int = 0
    dead_workers: list[int] = field(default_factory=list)
    max_staleness: int | None = None
    gc_variant: str = "cyclic"
    output: str = "metrics.csv"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme in ("lwpd", "kac"):
            if not is_power_of_two(self.t) or self.t < 2:
                raise ConfigError(f"t must be a power of two >= 2, got {self.t}")
        if self.scheme == "kac":
            if self.K is None:
                raise ConfigError("scheme kac needs K")
            if not 1 <= self.K <= self.n - len(self.dead_workers):
                raise ConfigError(f"K={self.K} must lie in [1, live workers]")
        if self.scheme == "gc":
            if self.s_gc is None:
                raise ConfigError("scheme gc needs s_gc")
            if not 0 <= self.s_gc < self.n:
                raise ConfigError(f"s_gc={self.s_gc} must lie in [0, n)")
            if len(self.dead_workers) > self.s_gc:
                raise ConfigError("more dead workers than the gc straggler budget")
            if self.gc_variant not in ("cyclic", "fractional"):
                raise ConfigError(f"unknown gc_variant {self.gc_variant!r}")
            if self.gc_variant == "fractional" and self.n % (self.s_gc + 1):
                raise ConfigError("fractional repetition needs (s_gc + 1) | n")
        for name in ("base", "rate", "straggler_factor", "downlink", "uplink"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.rate == 0:
            raise ConfigError("rate must be positive (use .inf for no jitter)")
        if not 0 <= self.straggler_prob <= 1:
            raise ConfigError("straggler_prob must lie in [0, 1]")
        if self.family not in ("logistic", "mlp"):
            raise ConfigError(f"family must be logistic or mlp, got {self.family!r}")
        if self.family == "logistic" and self.hidden:
            raise ConfigError("logistic models take no hidden layers")
        if self.family == "mlp" and not self.hidden:
            raise ConfigError("mlp models need at least one hidden layer")
        if self.mode not in ("data", "2d"):
            raise ConfigError(f"mode must be data or 2d, got {self.mode!r}")
        if any(not 0 <= w < self.n for w in self.dead_workers):
            raise ConfigError("dead worker index out of range")
        if self.time_budget <= 0 or self.eval_interval <= 0:
            raise ConfigError("time_budget and eval_interval must be positive")
        if self.lr < 0:
            raise ConfigError("lr must be nonnegative")
        zero_time = self.base == 0 and math.isinf(self.rate) and self.downlink == 0 and self.uplink == 0
        if zero_time and self.max_updates <= 0:
            raise ConfigError("zero-delay runs need max_updates > 0")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "scheme" not in data:
        raise ConfigError("config needs a scheme")
    data = dict(data)
    for key in ("hidden", "dead_workers"):
        if key in data and data[key] is None:
            data[key] = []
    for key in ("rate", "base", "lr", "time_budget", "eval_interval", "spread"):
        if key in data and data[key] is not None:
            data[key] = float(data[key])
    try:
        return ExperimentConfig(**data)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} is not a key-value mapping")
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def save_config(cfg: ExperimentConfig, path) -> None:
    atomic_write(path, dump_config(cfg))
