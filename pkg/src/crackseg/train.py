"""Training loop over an in-memory sample list."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import RunConfig
from .data import Sample, synth_dataset
from .errors import NumericalError
from .head import CrackSegNet
from .losses import combined_loss
from .metrics import confusion, f1_score
from .optim import AdamW
from .tensor import sigmoid

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: CrackSegNet
    log: list[dict] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.log[-1]["loss"] if self.log else float("nan")

    @property
    def final_f1(self) -> float:
        return self.log[-1]["train_f1"] if self.log else float("nan")


def synthetic_samples(cfg: RunConfig, count: int | None = None) -> list[Sample]:
    d = cfg.data
    size = cfg.network.image_size
    return synth_dataset(
        d.synthetic if count is None else count, size, size, seed=cfg.seed,
        stroke_count=d.stroke_count, width_range=(d.width_min, d.width_max),
        contrast=d.contrast, noise_level=d.noise_level,
    )


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of index batches; reshuffled every epoch."""
    while True:
        order = rng.permutation(n) if batch_size < n else np.arange(n)
        for start in range(0, n, batch_size):
            yield order[start:start + batch_size]


def train_f1(prob: np.ndarray, target: np.ndarray, threshold: float = 0.5) -> float:
    tp, fp, fn, _ = confusion(prob > threshold, target.astype(bool))
    return f1_score(tp, fp, fn)


def train(cfg: RunConfig, samples: Sequence[Sample], model: CrackSegNet | None = None) -> TrainResult:
    """Run ``cfg.optim.steps`` AdamW updates; every step is logged before its update is applied."""
    if not samples:
        raise ValueError("no training samples")
    model = model or CrackSegNet(cfg.network, seed=cfg.seed)
    images = np.stack([s.image for s in samples])
    masks = np.stack([s.mask for s in samples])
    opt = AdamW(model.parameters(), cfg.optim)
    batches = _batches(len(samples), cfg.optim.batch_size, np.random.default_rng(cfg.seed + 1))
    result = TrainResult(model)
    for step in range(cfg.optim.steps):
        idx = next(batches)
        x, y = images[idx], masks[idx]
        model.zero_grad()
        prob = sigmoid(model(x))
        loss = combined_loss(prob, y, cfg.loss)
        value = loss.item()
        if not math.isfinite(value):
            raise NumericalError(f"loss diverged at step {step}: {value}")
        f1 = train_f1(prob.data, y)
        entry = {"step": step, "loss": value, "train_f1": f1, "lr": opt.lr_at(step)}
        result.log.append(entry)
        log.info("step %d loss %.6f f1 %.4f", step, value, f1)
        if cfg.optim.stop_f1 is not None and f1 >= cfg.optim.stop_f1:
            break
        loss.backward()
        opt.step()
    return result
