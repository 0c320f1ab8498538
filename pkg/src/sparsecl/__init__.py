"""Sparse continual learning: Top-K sparse MLPs with selective subnetwork
distillation, an optional diagonal-Fisher regularizer, and a full
metrics/ablation harness."""

from .continual import ContinualState, TrainConfig, run_sequence, run_task
from .distill import DistillConfig, LossReport
from .metrics import RunResult
from .model import LayerSpec, SdmlpModel, forward, init_model

__all__ = [
    "ContinualState",
    "DistillConfig",
    "LayerSpec",
    "LossReport",
    "RunResult",
    "SdmlpModel",
    "TrainConfig",
    "forward",
    "init_model",
    "run_sequence",
    "run_task",
]

__version__ = "0.1.0"
