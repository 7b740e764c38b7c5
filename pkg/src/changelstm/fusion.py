"""Cross-scale fusion of change representations and the change-map head.

Each fusion step treats the higher-resolution map as the reference: the
low-resolution map is enhanced, channel-aligned, upsampled and added, then
re-queried through cross-attention whose keys/values live on a 4x-reduced
token grid to keep the attention cost down. The decode head turns the final
quarter-scale representation into full-resolution logits.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, ShapeError
from .functional import bilinear_upsample, conv2d, softmax
from .module import Conv2d, DSConv, Module
from .xlstm import raster_flatten, raster_unflatten


class MLPResidual(Module):
    """x + W2 silu(W1 x) applied per spatial location via 1x1 convs."""

    def __init__(self, ch: int, rng: np.random.Generator, expand: int = 2):
        self.fc1 = Conv2d(ch, ch * expand, 1, rng)
        self.fc2 = Conv2d(ch * expand, ch, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.fc1.weight.shape[1]:
            raise ShapeError(
                f"MLPResidual: expected {self.fc1.weight.shape[1]} channels, "
                f"got {x.shape[1]}")
        return x + self.fc2(self.fc1(x).silu())


class CrossScaleFusion(Module):
    """Fuse a low-res change map into a high-res reference map.

    Queries come from the reference after the upsample-add; keys and values
    come from the aligned low branch after a stride-2 depthwise reduction,
    so each query attends over a 4x-smaller token set.
    """

    def __init__(self, ch_high: int, ch_low: int, rng: np.random.Generator,
                 heads: int = 1):
        if ch_high % heads != 0:
            raise ShapeError(
                f"CrossScaleFusion: channels {ch_high} not divisible by {heads} heads")
        self.ch_high = ch_high
        self.ch_low = ch_low
        self.heads = heads
        self.low_mlp = MLPResidual(ch_low, rng)
        self.lateral = Conv2d(ch_low, ch_high, 1, rng)
        self.reduce = Conv2d(ch_high, ch_high, 3, rng, stride=2, padding=1,
                             groups=ch_high)
        self.proj_q = Conv2d(ch_high, ch_high, 1, rng)
        self.proj_k = Conv2d(ch_high, ch_high, 1, rng)
        self.proj_v = Conv2d(ch_high, ch_high, 1, rng)
        self.proj_out = Conv2d(ch_high, ch_high, 1, rng)
        self.out_mlp = MLPResidual(ch_high, rng)
        self.last_attention: np.ndarray | None = None

    def _split_heads(self, seq: Tensor) -> Tensor:
        n, length, c = seq.shape
        return seq.reshape(n, length, self.heads, c // self.heads).transpose(0, 2, 1, 3)

    def forward(self, rh: Tensor, rl: Tensor) -> Tensor:
        _, _, hh, wh = rh.shape
        _, _, hl, wl = rl.shape
        if (hh, wh) != (2 * hl, 2 * wl):
            raise ShapeError(
                f"CrossScaleFusion: low map {hl}x{wl} must be exactly half of "
                f"reference {hh}x{wh}")
        if rh.shape[1] != self.ch_high or rl.shape[1] != self.ch_low:
            raise ShapeError(
                f"CrossScaleFusion: channel mismatch, expected "
                f"({self.ch_high}, {self.ch_low}), got ({rh.shape[1]}, {rl.shape[1]})")

        low = self.low_mlp(rl)
        aligned = self.lateral(low)
        ref = rh + bilinear_upsample(aligned, 2)
        reduced = self.reduce(aligned)

        q = self._split_heads(raster_flatten(self.proj_q(ref)))
        k = self._split_heads(raster_flatten(self.proj_k(reduced)))
        v = self._split_heads(raster_flatten(self.proj_v(reduced)))
        scale = 1.0 / np.sqrt(q.shape[-1])
        attn = softmax((q @ k.transpose(0, 1, 3, 2)) * scale, axis=-1)
        self.last_attention = attn.data.copy()
        ctx = attn @ v
        n, _, lq, dh = ctx.shape
        ctx = ctx.transpose(0, 2, 1, 3).reshape(n, lq, self.heads * dh)
        fused = ref + self.proj_out(raster_unflatten(ctx, hh, wh))
        return self.out_mlp(fused)


class DecodeHead(Module):
    """Quarter-scale representation -> full-resolution change logits.

    First layer: pointwise MLP with a parallel depthwise-separable residual;
    second layer: pointwise projection to one channel; then a 4x bilinear
    upsample. No sigmoid: the output is raw logits.
    """

    def __init__(self, ch: int, rng: np.random.Generator):
        self.fc1 = Conv2d(ch, ch, 1, rng)
        self.residual = DSConv(ch, ch, rng)
        self.fc2 = Conv2d(ch, 1, 1, rng)

    def forward(self, r: Tensor) -> Tensor:
        y = self.fc1(r).silu() + self.residual(r)
        return bilinear_upsample(self.fc2(y), 4)
