"""Full change-detection model: encoder, per-stage enhancers, fusion, head."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor
from .backbone import SiameseEncoder
from .enhancer import build_enhancers
from .fusion import CrossScaleFusion, DecodeHead
from .module import Module

DEFAULT_CHANNELS = (16, 32, 64, 128)
DEFAULT_ASSIGNMENT = "SSGG"


class ChangeDetector(Module):
    """Bi-temporal images in, full-resolution change logits out.

    The four pyramid stages are enhanced per the assignment string
    (S = axial/shallow, G = global/deep), then folded coarsest-first into
    the quarter-scale reference through three cross-scale fusions.
    """

    def __init__(self, channels: tuple[int, ...] = DEFAULT_CHANNELS,
                 assignment: str = DEFAULT_ASSIGNMENT,
                 mlstm_heads: int = 4, attention_heads: int = 1,
                 seed: int = 0):
        rng = np.random.default_rng(seed)
        self.channels = tuple(channels)
        self.assignment = assignment
        self.backbone = SiameseEncoder(self.channels, rng)
        self.enhancers = build_enhancers(assignment, self.channels, rng,
                                         heads=mlstm_heads)
        c0, c1, c2, c3 = self.channels
        self.fuse_32_16 = CrossScaleFusion(c2, c3, rng, heads=attention_heads)
        self.fuse_16_8 = CrossScaleFusion(c1, c2, rng, heads=attention_heads)
        self.fuse_8_4 = CrossScaleFusion(c0, c1, rng, heads=attention_heads)
        self.head = DecodeHead(c0, rng)

    def forward(self, img1: Tensor, img2: Tensor) -> Tensor:
        feats1, feats2 = self.backbone(img1, img2)
        reps = [enh(f1, f2)
                for enh, f1, f2 in zip(self.enhancers, feats1, feats2)]
        fused = self.fuse_32_16(reps[2], reps[3])
        fused = self.fuse_16_8(reps[1], fused)
        fused = self.fuse_8_4(reps[0], fused)
        return self.head(fused)
