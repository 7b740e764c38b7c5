"""Weight-shared two-branch encoder producing four-stage feature pyramids."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, ShapeError
from .module import Conv2d, Module

STRIDE_TOTAL = 32


class _Stage(Module):
    """Stride-2 reduction conv followed by a stride-1 refinement conv."""

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator):
        self.down = Conv2d(in_ch, out_ch, 3, rng, stride=2, padding=1)
        self.refine = Conv2d(out_ch, out_ch, 3, rng, stride=1, padding=1)

    def forward(self, x: Tensor) -> Tensor:
        return self.refine(self.down(x).silu()).silu()


class SiameseEncoder(Module):
    """Four pyramid stages at strides 4/8/16/32; one parameter set, two inputs.

    A stem stride-2 conv precedes stage 0, so the first stage lands at 1/4
    of the input resolution.
    """

    def __init__(self, channels: tuple[int, ...], rng: np.random.Generator):
        if len(channels) != 4:
            raise ShapeError(f"SiameseEncoder: need 4 stage channel counts, got {channels}")
        if any(b <= a for a, b in zip(channels, channels[1:])):
            raise ShapeError(
                f"SiameseEncoder: stage channels must strictly increase, got {channels}")
        self.channels = tuple(channels)
        self.stem = Conv2d(3, channels[0], 3, rng, stride=2, padding=1)
        self.stages = [_Stage(cin, cout, rng)
                       for cin, cout in zip((channels[0],) + self.channels, channels)]

    def forward_single(self, img: Tensor) -> list[Tensor]:
        if img.ndim != 4 or img.shape[1] != 3:
            raise ShapeError(f"SiameseEncoder: expected (N,3,H,W) input, got {img.shape}")
        _, _, h, w = img.shape
        for name, dim in (("height", h), ("width", w)):
            if dim % STRIDE_TOTAL != 0:
                raise ShapeError(
                    f"SiameseEncoder: {name} {dim} must be divisible by {STRIDE_TOTAL}")
        x = self.stem(img).silu()
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats

    def forward(self, img1: Tensor, img2: Tensor) -> tuple[list[Tensor], list[Tensor]]:
        if img1.shape != img2.shape:
            raise ShapeError(
                f"SiameseEncoder: temporal inputs differ in shape: {img1.shape} vs {img2.shape}")
        return self.forward_single(img1), self.forward_single(img2)
