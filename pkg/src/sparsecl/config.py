"""Experiment configuration: a strict JSON schema built on dataclasses.

Unknown keys are rejected at every nesting level so a typo in a sweep config
fails loudly instead of silently falling back to a default. to_dict() emits
the fully-resolved config (all defaults materialized), which run outputs echo
back so any run is re-runnable from its own summary.json.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .continual import TrainConfig
from .distill import DistillConfig

METHODS = ("sdmlp_baseline", "ssd", "ssd_ewc", "ewc_only")


class ConfigError(ValueError):
    """Invalid experiment configuration, with a field-level message."""


@dataclass
class SyntheticDataConfig:
    num_classes: int = 10
    dim: int = 16
    samples_per_class: int = 100
    cluster_spread: float = 0.25
    data_seed: int = 0


@dataclass
class EmbeddingDataConfig:
    path: str = ""
    format: str = "binary"  # or "csv"
    val_path: str | None = None


@dataclass
class DataConfig:
    source: str = "synthetic"  # or "embeddings"
    synthetic: SyntheticDataConfig = field(default_factory=SyntheticDataConfig)
    embeddings: EmbeddingDataConfig = field(default_factory=EmbeddingDataConfig)
    num_tasks: int = 5
    classes_per_task: int = 2
    val_fraction: float = 0.2
    shuffle_classes: bool = False


@dataclass
class ModelConfig:
    hidden_sizes: list[int] = field(default_factory=lambda: [200])
    k: int = 10
    constrain_output: bool = True


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    method: str = "ssd"
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: list[int] = field(default_factory=lambda: [0])

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        ewc = self.method in ("ssd_ewc", "ewc_only")
        if ewc and self.train.ewc_lambda <= 0:
            raise ConfigError(f"method {self.method!r} requires train.ewc_lambda > 0")
        if not ewc and self.train.ewc_lambda > 0:
            raise ConfigError(
                f"train.ewc_lambda is only valid with an EWC method, got {self.method!r}"
            )

    def resolved_train(self, seed: int) -> TrainConfig:
        """TrainConfig with the method selector folded into its flags."""
        cfg = dataclasses.replace(
            self.train,
            distill=dataclasses.replace(self.train.distill),
            seed=seed,
            distill_enabled=self.method in ("ssd", "ssd_ewc"),
            ewc_enabled=self.method in ("ssd_ewc", "ewc_only"),
        )
        return cfg


_NESTED = {
    DataConfig: {"synthetic": SyntheticDataConfig, "embeddings": EmbeddingDataConfig},
    ExperimentConfig: {"data": DataConfig, "model": ModelConfig, "train": TrainConfig},
    TrainConfig: {"distill": DistillConfig},
}


def _build(cls, raw: dict, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(raw).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    nested = _NESTED.get(cls, {})
    kwargs = {}
    for key, value in raw.items():
        where = f"{path}.{key}" if path else key
        if key not in fields:
            known = ", ".join(sorted(fields))
            raise ConfigError(f"unknown key {where!r}; known keys: {known}")
        if key in nested:
            kwargs[key] = _build(nested[key], value, where)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path or 'config'}: {exc}")


def config_from_dict(raw: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, raw, "")


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Fully-resolved plain dict (every default materialized)."""
    return dataclasses.asdict(cfg)
