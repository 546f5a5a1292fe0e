"""Adversarial-sample detection from residual-network trajectories.

The package trains small residual classifiers (optionally with a
transport-cost regularization solved by a method of multipliers), attacks
them with gradient attacks, extracts per-block trajectory features, and
fits two detectors: a class-conditional random-forest ensemble and a
transport-cost quantile band.
"""

from .attacks import AttackConfig, AttackResult, attack_batch, bim, deepfool, fgm, pgd
from .autodiff import Graph, Tensor, grad_check
from .model import (
    ResidualBlock,
    ResidualNet,
    Trajectory,
    forward,
    init_net,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
    transport_cost,
)
from .trainer import TrainConfig, TrainReport, objective, train

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackResult",
    "Graph",
    "ResidualBlock",
    "ResidualNet",
    "Tensor",
    "TrainConfig",
    "TrainReport",
    "Trajectory",
    "__version__",
    "attack_batch",
    "bim",
    "deepfool",
    "fgm",
    "forward",
    "grad_check",
    "init_net",
    "load_checkpoint",
    "objective",
    "pgd",
    "predict_batch",
    "save_checkpoint",
    "train",
    "transport_cost",
]
