"""Confusion-count accumulation and the five evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("f1", "precision", "recall", "iou", "oa")


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel counts; all metrics derive from these four fields."""
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def binarize_logits(logits: np.ndarray) -> np.ndarray:
    """Threshold at logit 0, i.e. probability 0.5."""
    return (np.asarray(logits) > 0).astype(np.int64)


def update_confusion(pred: np.ndarray, target: np.ndarray,
                     acc: ConfusionCounts = ConfusionCounts()) -> ConfusionCounts:
    pred = np.asarray(pred).astype(bool)
    target = np.asarray(target).astype(bool)
    if pred.shape != target.shape:
        raise ValueError(
            f"update_confusion: shape mismatch {pred.shape} vs {target.shape}")
    return acc + ConfusionCounts(
        tp=int(np.count_nonzero(pred & target)),
        fp=int(np.count_nonzero(pred & ~target)),
        fn=int(np.count_nonzero(~pred & target)),
        tn=int(np.count_nonzero(~pred & ~target)),
    )


def _ratio(num: float, den: float) -> float:
    """0/0 resolves to 0 by convention."""
    return num / den if den > 0 else 0.0


def metrics(acc: ConfusionCounts) -> dict[str, float]:
    """F1, precision, recall, IoU and overall accuracy from counts."""
    precision = _ratio(acc.tp, acc.tp + acc.fp)
    recall = _ratio(acc.tp, acc.tp + acc.fn)
    f1 = _ratio(2.0 * precision * recall, precision + recall)
    iou = _ratio(acc.tp, acc.tp + acc.fp + acc.fn)
    oa = _ratio(acc.tp + acc.tn, acc.total)
    return {"f1": f1, "precision": precision, "recall": recall,
            "iou": iou, "oa": oa}
