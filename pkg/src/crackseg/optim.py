"""AdamW with polynomial learning-rate decay."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .config import OptimConfig
from .nn import Parameter


def poly_lr(base_lr: float, step: int, total_steps: int, power: float = 0.9) -> float:
    """``base_lr * (1 - step / total_steps) ** power``; constant when ``total_steps`` is 0."""
    if total_steps <= 0:
        return base_lr
    frac = min(max(step / total_steps, 0.0), 1.0)
    return base_lr * (1.0 - frac) ** power


class AdamW:
    """Adaptive moments with weight decay applied directly to the weights."""

    def __init__(self, params: Sequence[Parameter], cfg: OptimConfig = OptimConfig()):
        self.params = list(params)
        self.cfg = cfg
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def lr_at(self, step: int) -> float:
        return poly_lr(self.cfg.lr, step, self.cfg.steps, self.cfg.poly_power)

    def step(self) -> float:
        """Apply one update using the current ``.grad`` buffers; returns the learning rate used."""
        lr = self.lr_at(self.t)
        self.t += 1
        b1, b2 = self.cfg.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            update = (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.cfg.eps)
            p.data = p.data * (1.0 - lr * self.cfg.weight_decay) - lr * update
        return lr
