"""Dice + binary cross-entropy training objective."""

from __future__ import annotations

from .config import LossConfig
from .errors import ShapeError
from .tensor import Tensor, as_tensor, clip, log, mean, mul, sub, sum_


def _check(prob: Tensor, target: Tensor) -> None:
    if prob.shape != target.shape:
        raise ShapeError(f"prediction shape {prob.shape} != target shape {target.shape}")


def dice_loss(prob, target, eps: float = 1.0) -> Tensor:
    """``1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps)`` over all pixels."""
    prob, target = as_tensor(prob), as_tensor(target)
    _check(prob, target)
    inter = sum_(mul(prob, target))
    denom = sum_(prob) + float(target.data.sum()) + eps
    return sub(1.0, (inter * 2.0 + eps) / denom)


def bce_loss(prob, target, clamp: float = 1e-7) -> Tensor:
    """Mean negative log-likelihood with probabilities clamped to ``[clamp, 1 - clamp]``."""
    prob, target = as_tensor(prob), as_tensor(target)
    _check(prob, target)
    p = clip(prob, clamp, 1.0 - clamp)
    t = target.data
    nll = mul(log(p), t) + mul(log(sub(1.0, p)), 1.0 - t)
    return -mean(nll)


def combined_loss(prob, target, cfg: LossConfig = LossConfig()) -> Tensor:
    total = dice_loss(prob, target, cfg.eps) * cfg.alpha
    return total + bce_loss(prob, target, cfg.clamp) * cfg.beta


def loss_terms(prob, target, cfg: LossConfig = LossConfig()) -> dict[str, float]:
    d = dice_loss(prob, target, cfg.eps).item()
    b = bce_loss(prob, target, cfg.clamp).item()
    return {"dice": d, "bce": b, "total": cfg.alpha * d + cfg.beta * b}

