"""Unbiased dynamic multimodal learning on a controllable synthetic benchmark."""

from . import autodiff, dependency, encoder, estimator, fusion, metrics, nn, synthdata, trainer
from .autodiff import Tensor
from .trainer import Corruption, RunRecord, TrainConfig, UdmlModel, evaluate, train

__all__ = [
    "Tensor",
    "TrainConfig",
    "UdmlModel",
    "RunRecord",
    "Corruption",
    "train",
    "evaluate",
    "autodiff",
    "nn",
    "encoder",
    "estimator",
    "dependency",
    "fusion",
    "synthdata",
    "trainer",
    "metrics",
]
