"""Per-stage feature enhancement turning bi-temporal features into change maps.

Two variants share the same temporal attention machinery:

* GlobalChangeEnhancer (deep stages) scans the full raster-flattened
  difference map with a bidirectional matrix-LSTM and modulates it with
  per-frame temporal weights.
* AxialChangeEnhancer (shallow stages) scans height and width profiles of
  the difference map, broadcasts them back as an axial spatial gate, and
  refines the original frames.

Both return a single change representation with the stage's channel count.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, ShapeError, concat_channels
from .functional import axial_avgpool
from .module import Conv2d, DSConv, Module
from .xlstm import BiMLSTM, raster_flatten, raster_unflatten


def coarse_diff(f1: Tensor, f2: Tensor) -> Tensor:
    """Signed element-wise difference of two same-shape feature maps."""
    if f1.shape != f2.shape:
        raise ShapeError(f"coarse_diff: shape mismatch {f1.shape} vs {f2.shape}")
    return f1 - f2


class TemporalWeight(Module):
    """Per-frame attention map: sigmoid(conv1x1(dsconv(concat(diff, frame))))."""

    def __init__(self, ch: int, rng: np.random.Generator):
        self.mix = DSConv(2 * ch, ch, rng)
        self.proj = Conv2d(ch, ch, 1, rng)

    def forward(self, fc: Tensor, ft: Tensor) -> Tensor:
        if fc.shape != ft.shape:
            raise ShapeError(f"TemporalWeight: shape mismatch {fc.shape} vs {ft.shape}")
        return self.proj(self.mix(concat_channels(fc, ft))).sigmoid()


class GlobalChangeEnhancer(Module):
    """Deep-stage enhancer: bidirectional scan of the whole difference map."""

    def __init__(self, ch: int, rng: np.random.Generator, heads: int = 4):
        self.temporal = TemporalWeight(ch, rng)
        self.phi = BiMLSTM(ch, rng, heads=heads)
        self.fuse = DSConv(2 * ch, ch, rng)

    def forward(self, f1: Tensor, f2: Tensor) -> Tensor:
        fc = coarse_diff(f1, f2)
        w1 = self.temporal(fc, f1)
        w2 = self.temporal(fc, f2)
        _, _, h, w = fc.shape
        scanned = raster_unflatten(self.phi(raster_flatten(fc)), h, w)
        return self.fuse(concat_channels(w1 * scanned, w2 * scanned))


class AxialWeight(Module):
    """Axial spatial gate from scanned height/width profiles of the difference."""

    def __init__(self, ch: int, rng: np.random.Generator, heads: int = 4):
        self.phi_col = BiMLSTM(ch, rng, heads=heads)   # scans column profiles (length H)
        self.phi_row = BiMLSTM(ch, rng, heads=heads)   # scans row profiles (length W)
        self.proj = Conv2d(ch, ch, 1, rng)

    def forward(self, fc: Tensor) -> Tensor:
        n, c, h, w = fc.shape
        col = axial_avgpool(fc, "width")           # (N,C,H,1) column profile
        row = axial_avgpool(fc, "height")          # (N,C,1,W) row profile
        col_seq = col.reshape(n, c, h).transpose(0, 2, 1)
        row_seq = row.reshape(n, c, w).transpose(0, 2, 1)
        col_scan = self.phi_col(col_seq).transpose(0, 2, 1).reshape(n, c, h, 1)
        row_scan = self.phi_row(row_seq).transpose(0, 2, 1).reshape(n, c, 1, w)
        return self.proj(fc + col_scan + row_scan).sigmoid()


class AxialChangeEnhancer(Module):
    """Shallow-stage enhancer: axial gate times temporal weights on each frame."""

    def __init__(self, ch: int, rng: np.random.Generator, heads: int = 4):
        self.temporal = TemporalWeight(ch, rng)
        self.axial = AxialWeight(ch, rng, heads=heads)
        self.fuse = DSConv(2 * ch, ch, rng)

    def forward(self, f1: Tensor, f2: Tensor) -> Tensor:
        fc = coarse_diff(f1, f2)
        w1 = self.temporal(fc, f1)
        w2 = self.temporal(fc, f2)
        wc = self.axial(fc)
        return self.fuse(concat_channels(wc * w1 * f1, wc * w2 * f2))


ENHANCER_KINDS = {"S": AxialChangeEnhancer, "G": GlobalChangeEnhancer}


def build_enhancers(assignment: str, channels: tuple[int, ...],
                    rng: np.random.Generator, heads: int = 4) -> list[Module]:
    """One enhancer per pyramid stage from an assignment string over {S, G}."""
    if len(assignment) != len(channels):
        raise ValueError(
            f"assignment {assignment!r} must name {len(channels)} stages")
    out = []
    for letter, ch in zip(assignment, channels):
        if letter not in ENHANCER_KINDS:
            raise ValueError(
                f"assignment letter {letter!r} invalid, expected one of "
                f"{sorted(ENHANCER_KINDS)}")
        out.append(ENHANCER_KINDS[letter](ch, rng, heads=heads))
    return out
