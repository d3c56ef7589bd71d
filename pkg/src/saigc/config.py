"""Run configuration shared by the command-line tools.

Values come from three layers, later ones winning: built-in defaults, an
optional YAML/JSON config file, explicit command-line flags.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from .channel import BudgetConfig
from .codec import NoiseConfig
from .rl import TrainingConfig


class ConfigError(ValueError):
    """Bad or unknown configuration value; ``key`` names the offending setting."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    # paths
    data: str | None = None
    policy: str | None = None
    out: str | None = None
    log: str | None = None
    # dataset
    train: int = 200
    test: int = 50
    seed: int = 0
    # training
    gamma: float = TrainingConfig.gamma
    lr_actor: float = TrainingConfig.lr_actor
    lr_critic: float = TrainingConfig.lr_critic
    lambda_len: float = TrainingConfig.lambda_len
    horizon: int = TrainingConfig.horizon
    episodes: int = TrainingConfig.episodes
    # encoder noise
    p_drop_heading: float = NoiseConfig.p_drop_heading
    p_drop_other: float = NoiseConfig.p_drop_other
    p_clutter: float = NoiseConfig.p_clutter
    p_value_swap: float = NoiseConfig.p_value_swap
    # evaluation
    budget: int = 139
    budgets: tuple[int, ...] = (23, 139, 371, 2810)
    k: tuple[int, ...] = (1, 5)
    mode: str = "modified"
    reference: str = "desk"

    def training_config(self) -> TrainingConfig:
        return self._build("training", TrainingConfig, gamma=self.gamma, lr_actor=self.lr_actor,
                           lr_critic=self.lr_critic, lambda_len=self.lambda_len, horizon=self.horizon,
                           episodes=self.episodes, seed=self.seed)

    def noise_config(self) -> NoiseConfig:
        return self._build("noise", NoiseConfig, p_drop_heading=self.p_drop_heading,
                           p_drop_other=self.p_drop_other, p_clutter=self.p_clutter,
                           p_value_swap=self.p_value_swap)

    def budget_config(self) -> BudgetConfig:
        return self._build("budget", BudgetConfig, budget_bytes=self.budget)

    @staticmethod
    def _build(key, cls, **kwargs):
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))
_TUPLE_FIELDS = {"budgets", "k"}


def _coerce(key: str, value, default):
    try:
        if key in _TUPLE_FIELDS:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            return tuple(int(v) for v in value)
        if default is None:
            return None if value is None else str(value)
        if isinstance(default, int) and isinstance(value, float) and not value.is_integer():
            raise ValueError
        return type(default)(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot interpret {value!r}") from None


def load_config_file(path: str | Path) -> dict:
    """Read a YAML (or JSON) mapping of RunConfig keys; unknown keys are rejected."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a mapping")
    doc = {str(k).replace("-", "_"): v for k, v in doc.items()}
    unknown = sorted(set(doc) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(unknown[0], "unknown config key")
    return doc


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    base = RunConfig()
    merged = {}
    for layer in (file_values or {}, overrides or {}):
        for key, value in layer.items():
            if key not in FIELD_NAMES:
                raise ConfigError(key, "unknown config key")
            merged[key] = _coerce(key, value, getattr(base, key))
    return replace(base, **merged)


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
