"""Pipeline configuration: defaults, JSON file loading, flag overrides.

Resolution order: built-in defaults, then the JSON config file (explicit
``--config`` path or the ``DEEPAGENT_CONFIG`` environment variable), then
command-line flags.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from deepagent.errors import ConfigurationError

CONFIG_ENV_VAR = "DEEPAGENT_CONFIG"


@dataclass
class Agent1Config:
    learning_rate: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    epochs: int = 50
    batch_size: int = 16
    augment: bool = True


@dataclass
class Agent2Config:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    epochs: int = 100
    batch_size: int = 16
    early_stop_patience: int = 10
    lr_factor: float = 0.5
    lr_patience: int = 5


@dataclass
class PipelineConfig:
    seed: int = 42
    train_fraction: float = 0.70
    val_fraction: float = 0.20
    test_fraction: float = 0.10
    frame_policy: str = "interval5"   # "interval5" or "even"
    frame_interval: int = 5
    m: int = 30                       # cap for the "even" policy
    meta_dims: int = 2
    mel_filters: int = 13
    desk_scale: bool = False
    forest_trees: int = 100
    folds: int = 5
    agent1: Agent1Config = field(default_factory=Agent1Config)
    agent2: Agent2Config = field(default_factory=Agent2Config)

    @property
    def fractions(self):
        return (self.train_fraction, self.val_fraction, self.test_fraction)

    @property
    def input_size(self) -> int:
        return 64 if self.desk_scale else 224

    def validate(self) -> "PipelineConfig":
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigurationError(
                f"split fractions must sum to 1, got {self.fractions}")
        if self.frame_policy not in ("interval5", "even"):
            raise ConfigurationError(
                f"frame_policy must be 'interval5' or 'even', got {self.frame_policy!r}")
        if self.meta_dims not in (2, 4):
            raise ConfigurationError(f"meta_dims must be 2 or 4, got {self.meta_dims}")
        if self.m < 1:
            raise ConfigurationError(f"m must be >= 1, got {self.m}")
        if self.mel_filters < 1:
            raise ConfigurationError(f"mel_filters must be >= 1, got {self.mel_filters}")
        return self


def _apply(obj, data: dict, context: str):
    known = {f.name: f for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ConfigurationError(f"unknown config key {context}{key}")
        current = getattr(obj, key)
        if isinstance(current, (Agent1Config, Agent2Config)):
            if not isinstance(value, dict):
                raise ConfigurationError(f"config key {context}{key} must be an object")
            _apply(current, value, f"{context}{key}.")
        else:
            setattr(obj, key, value)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build a validated config from defaults, optional file, and overrides."""
    cfg = PipelineConfig()
    if path is None:
        env = os.environ.get(CONFIG_ENV_VAR)
        if env:
            path = env
    if path is not None:
        p = Path(path)
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {p}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"config {p} must be a JSON object")
        _apply(cfg, data, "")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        _apply(cfg, {key: value}, "")
    return cfg.validate()
