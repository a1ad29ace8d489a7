"""Train-and-evaluate sweeps along one configuration axis."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from typing import Sequence

import numpy as np

from .config import RunConfig
from .data import Sample
from .errors import ConfigError
from .metrics import evaluate
from .train import synthetic_samples, train

SCAN_VALUES = ("parallel", "diagonal", "parallel-snake", "diagonal-snake", "sass")
LAYER_VALUES = (2, 4, 8)
PATCH_VALUES = (4, 8, 16, 32)
# (label, dice weight alpha, bce weight beta); labels read alpha:beta
LOSS_RATIO_VALUES = (
    ("bce-only", 0.0, 1.0),
    ("dice-only", 1.0, 0.0),
    ("5:1", 5.0, 1.0),
    ("4:1", 4.0, 1.0),
    ("3:1", 3.0, 1.0),
    ("2:1", 2.0, 1.0),
    ("1:1", 1.0, 1.0),
    ("1:2", 1.0, 2.0),
    ("1:3", 1.0, 3.0),
    ("1:4", 1.0, 4.0),
    ("1:5", 1.0, 5.0),
)
AXES = ("scan", "layers", "patch", "loss-ratio")
COLUMNS = ("axis", "value", "params", "steps_run", "final_loss", "train_f1",
           "ods", "ois", "precision", "recall", "f1", "miou")


def axis_variants(axis: str, base: RunConfig) -> list[tuple[str, RunConfig]]:
    net = base.network
    if axis == "scan":
        return [(s, base.replace(network=dataclasses.replace(net, scan_strategy=s))) for s in SCAN_VALUES]
    if axis == "layers":
        return [(str(n), base.replace(network=dataclasses.replace(net, num_layers=n))) for n in LAYER_VALUES]
    if axis == "patch":
        return [(str(p), base.replace(network=dataclasses.replace(net, patch_size=p)))
                for p in PATCH_VALUES if net.image_size % p == 0]
    if axis == "loss-ratio":
        return [(label, base.replace(loss=dataclasses.replace(base.loss, alpha=a, beta=b)))
                for label, a, b in LOSS_RATIO_VALUES]
    raise ConfigError(f"unknown ablation axis {axis!r}; choose from {', '.join(AXES)}")


def held_out(cfg: RunConfig, count: int) -> list[Sample]:
    return synthetic_samples(cfg.replace(seed=cfg.seed + 10_000), count)


def run_axis(axis: str, base: RunConfig, train_set: Sequence[Sample] | None = None,
             eval_set: Sequence[Sample] | None = None) -> list[dict]:
    """One row per axis value: training summary plus held-out metrics."""
    variants = axis_variants(axis, base)
    train_set = list(train_set) if train_set is not None else synthetic_samples(base)
    eval_set = list(eval_set) if eval_set is not None else held_out(base, len(train_set))
    images = np.stack([s.image for s in eval_set])
    rows = []
    for label, cfg in variants:
        result = train(cfg, train_set)
        probs = result.model.predict_proba(images)
        rep = evaluate(list(probs[:, 0]), [s.mask[0] for s in eval_set])
        rows.append({
            "axis": axis,
            "value": label,
            "params": result.model.num_parameters(),
            "steps_run": len(result.log),
            "final_loss": result.final_loss,
            "train_f1": result.final_f1,
            "ods": rep.ods,
            "ois": rep.ois,
            "precision": rep.precision,
            "recall": rep.recall,
            "f1": rep.f1,
            "miou": rep.miou,
        })
    return rows


def to_json(rows: list[dict], base: RunConfig) -> str:
    return json.dumps({"base_config": base.to_dict(), "rows": rows}, indent=2, sort_keys=True)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
