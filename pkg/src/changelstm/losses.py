"""Training losses on raw logits: binary cross-entropy plus soft dice."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, ShapeError, as_tensor


@dataclass(frozen=True)
class LossWeights:
    """Weights of the two loss terms; both default to 1 (1:1 ratio)."""
    lambda_ce: float = 1.0
    lambda_dice: float = 1.0

    def __post_init__(self):
        if self.lambda_ce < 0 or self.lambda_dice < 0:
            raise ValueError(
                f"loss weights must be non-negative, got "
                f"({self.lambda_ce}, {self.lambda_dice})")


def _check_target(logits: Tensor, target: np.ndarray) -> np.ndarray:
    target = np.asarray(target, dtype=np.float64)
    if target.shape != logits.shape:
        raise ShapeError(
            f"target shape {target.shape} does not match logits {logits.shape}")
    if not np.isin(target, (0.0, 1.0)).all():
        bad = target[~np.isin(target, (0.0, 1.0))].reshape(-1)[0]
        raise ValueError(f"target must be binary, found value {bad}")
    return target


def bce_loss(logits: Tensor, target: np.ndarray) -> Tensor:
    """Mean binary cross-entropy on logits, evaluated in the stable form
    softplus(z) - z*y (identical to -[y log s + (1-y) log(1-s)])."""
    target = _check_target(logits, target)
    t = as_tensor(target)
    return (logits.softplus() - logits * t).mean()


def dice_loss(logits: Tensor, target: np.ndarray, epsilon: float = 1.0) -> Tensor:
    """Soft dice on sigmoid probabilities: 1 - (2*sum(p*y)+eps)/(sum p + sum y + eps)."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    target = _check_target(logits, target)
    t = as_tensor(target)
    p = logits.sigmoid()
    overlap = (p * t).sum() * 2.0 + epsilon
    total = p.sum() + t.sum() + epsilon
    return 1.0 - overlap / total


def total_loss(logits: Tensor, target: np.ndarray,
               weights: LossWeights = LossWeights(),
               epsilon: float = 1.0) -> Tensor:
    return weights.lambda_ce * bce_loss(logits, target) \
        + weights.lambda_dice * dice_loss(logits, target, epsilon)
