"""Crack segmentation with multi-path selective scans and gated bottleneck convolutions."""

from .config import DataConfig, LossConfig, NetworkConfig, OptimConfig, RunConfig
from .head import CrackSegNet, binarize
from .metrics import evaluate
from .tensor import Tensor, no_grad

__version__ = "0.1.0"

__all__ = [
    "CrackSegNet",
    "DataConfig",
    "LossConfig",
    "NetworkConfig",
    "OptimConfig",
    "RunConfig",
    "Tensor",
    "binarize",
    "evaluate",
    "no_grad",
]
