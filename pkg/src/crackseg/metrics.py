"""Pixel-exact segmentation metrics with a shared threshold sweep.

ODS pools TP/FP/FN over the whole dataset before computing F1 at each
threshold and keeps the best threshold. OIS averages each image's best F1.
mIoU, precision, recall and F1 are reported at the ODS threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError, UsageError

REPORT_KEYS = ("ods", "ods_threshold", "ois", "precision", "recall", "f1", "miou", "thresholds")


def default_thresholds() -> np.ndarray:
    return np.arange(1, 100) / 100.0


def _as_binary(mask, what: str) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.dtype == bool:
        return arr
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{what} must be binary (0/1)")
    return arr.astype(bool)


def confusion(pred_mask, gt_mask) -> tuple[int, int, int, int]:
    """Return ``(TP, FP, FN, TN)`` pixel counts."""
    pred = _as_binary(pred_mask, "prediction mask")
    gt = _as_binary(gt_mask, "ground-truth mask")
    if pred.shape != gt.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    tn = int(pred.size - tp - fp - fn)
    return tp, fp, fn, tn


def precision(tp, fp, fn) -> float:
    if tp + fp == 0:
        return 1.0 if fn == 0 else 0.0
    return tp / (tp + fp)


def recall(tp, fp, fn) -> float:
    if tp + fn == 0:
        return 1.0 if fp == 0 else 0.0
    return tp / (tp + fn)


def f1_score(tp, fp, fn) -> float:
    """Harmonic mean ``2PR / (P + R)``; empty-vs-empty scores 1, no true positives otherwise scores 0."""
    if tp + fp + fn == 0:
        return 1.0
    if tp == 0:
        return 0.0
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    return 2 * p * r / (p + r)


def mean_iou(tp, fp, fn, tn) -> float:
    """Average of foreground and background IoU."""
    fg_den = tp + fp + fn
    bg_den = tn + fp + fn
    iou_fg = 1.0 if fg_den == 0 else tp / fg_den
    iou_bg = 1.0 if bg_den == 0 else tn / bg_den
    return 0.5 * (iou_fg + iou_bg)


def sweep_counts(prob: np.ndarray, gt: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """``[T, 4]`` integer array of (TP, FP, FN, TN) for ``prob > t`` at each threshold."""
    p = np.asarray(prob, dtype=np.float64).reshape(-1)
    g = _as_binary(gt, "ground-truth mask").reshape(-1)
    if p.size != g.size:
        raise ShapeError(f"prediction has {p.size} pixels, ground truth has {g.size}")
    pos = np.sort(p[g])
    neg = np.sort(p[~g])
    # count of values strictly above t
    tp = pos.size - np.searchsorted(pos, thresholds, side="right")
    fp = neg.size - np.searchsorted(neg, thresholds, side="right")
    fn = pos.size - tp
    tn = neg.size - fp
    return np.stack([tp, fp, fn, tn], axis=1).astype(np.int64)


@dataclass
class EvalReport:
    thresholds: np.ndarray
    per_image: np.ndarray  # [N, T, 4]
    pooled: np.ndarray  # [T, 4]
    ods: float
    ods_threshold: float
    ods_index: int
    ois: float
    precision: float
    recall: float
    f1: float
    miou: float

    def to_dict(self) -> dict:
        return {
            "ods": self.ods,
            "ods_threshold": self.ods_threshold,
            "ois": self.ois,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "miou": self.miou,
            "thresholds": [float(t) for t in self.thresholds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate(probs: Sequence, gts: Sequence, thresholds=None) -> EvalReport:
    if len(probs) == 0:
        raise UsageError("evaluate() needs at least one image")
    if len(probs) != len(gts):
        raise UsageError(f"{len(probs)} predictions but {len(gts)} ground-truth masks")
    thr = default_thresholds() if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    per_image = np.stack([sweep_counts(p, g, thr) for p, g in zip(probs, gts)])
    pooled = per_image.sum(axis=0)

    pooled_f1 = np.array([f1_score(tp, fp, fn) for tp, fp, fn, _ in pooled])
    best = int(np.argmax(pooled_f1))
    image_best = [max(f1_score(tp, fp, fn) for tp, fp, fn, _ in counts) for counts in per_image]
    tp, fp, fn, tn = (int(v) for v in pooled[best])
    return EvalReport(
        thresholds=thr,
        per_image=per_image,
        pooled=pooled,
        ods=float(pooled_f1[best]),
        ods_threshold=float(thr[best]),
        ods_index=best,
        ois=float(np.mean(image_best)),
        precision=precision(tp, fp, fn),
        recall=recall(tp, fp, fn),
        f1=f1_score(tp, fp, fn),
        miou=mean_iou(tp, fp, fn, tn),
    )
