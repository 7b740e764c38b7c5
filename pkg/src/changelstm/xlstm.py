"""Matrix-memory LSTM block and its bidirectional wrapper.

The cell keeps, per head, a d x d matrix memory updated by outer products of
values and keys, a normalizer vector, and a log-domain stabilizer that keeps
the exponential input/forget gates bounded over arbitrarily long scans. The
stabilized recurrence computes exactly the same function as the naive
exponential-gate recurrence (verified against it in the tests).

2-D feature maps enter as sequences via row-major raster flattening; the
scan order is isolated here so it can be swapped without touching callers.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .tensor import Tensor, ShapeError, concat, maximum, stack, zeros
from .module import LayerNorm, Linear, Module, Parameter, kaiming_uniform


class MLSTMState(NamedTuple):
    """Scan state: matrix memory (N,H,d,d), normalizer (N,H,d), stabilizer (N,H)."""
    memory: Tensor
    normalizer: Tensor
    stabilizer: Tensor


def initial_state(batch: int, heads: int, dim_head: int) -> MLSTMState:
    return MLSTMState(
        memory=zeros(batch, heads, dim_head, dim_head),
        normalizer=zeros(batch, heads, dim_head),
        stabilizer=zeros(batch, heads),
    )


def raster_flatten(x: Tensor) -> Tensor:
    """(N,C,H,W) -> (N, H*W, C) in row-major order (left-to-right, top-to-bottom)."""
    if x.ndim != 4:
        raise ShapeError(f"raster_flatten: expected 4-D input, got ndim {x.ndim}")
    n, c, h, w = x.shape
    return x.transpose(0, 2, 3, 1).reshape(n, h * w, c)


def raster_unflatten(seq: Tensor, height: int, width: int) -> Tensor:
    """Inverse of raster_flatten; the sequence length must equal height*width."""
    if seq.ndim != 3:
        raise ShapeError(f"raster_unflatten: expected 3-D input, got ndim {seq.ndim}")
    n, length, c = seq.shape
    if length != height * width:
        raise ShapeError(
            f"raster_unflatten: length {length} != height*width = {height * width}")
    return seq.reshape(n, height, width, c).transpose(0, 3, 1, 2)


def causal_conv1d(seq: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """Depthwise causal convolution over (N,L,C); position t sees inputs <= t.

    kernel has shape (K, C); tap j weights the input K-1-j steps in the past,
    so kernel[K-1] multiplies the current position.
    """
    n, length, c = seq.shape
    k = kernel.shape[0]
    pad = zeros(n, k - 1, c)
    xp = concat([pad, seq], axis=1)
    out = xp[:, 0:length, :] * kernel[0]
    for j in range(1, k):
        out = out + xp[:, j:j + length, :] * kernel[j]
    if bias is not None:
        out = out + bias
    return out


def mlstm_step(state: MLSTMState, q: Tensor, k: Tensor, v: Tensor,
               i_pre: Tensor, f_pre: Tensor, o_pre: Tensor
               ) -> tuple[MLSTMState, Tensor]:
    """One stabilized matrix-memory update.

    q, k, v, o_pre: (N, heads, d); i_pre, f_pre: (N, heads) gate preactivations.
    The forget gate is exponential (not sigmoid); the running log-max
    stabilizer keeps both exponentials bounded. The h-readout denominator
    uses exp(-stabilizer) so the stabilized scan equals the naive recurrence
    whose denominator is max(|n^T q|, 1).
    """
    memory, normalizer, stab = state
    n_b, heads, d = k.shape

    m_new = maximum(f_pre + stab, i_pre)
    i_act = (i_pre - m_new).exp()
    f_act = (f_pre + stab - m_new).exp()

    vk = v.reshape(n_b, heads, d, 1) @ k.reshape(n_b, heads, 1, d)
    mem_new = f_act.reshape(n_b, heads, 1, 1) * memory \
        + i_act.reshape(n_b, heads, 1, 1) * vk
    norm_new = f_act.reshape(n_b, heads, 1) * normalizer \
        + i_act.reshape(n_b, heads, 1) * k

    numer = (mem_new @ q.reshape(n_b, heads, d, 1)).reshape(n_b, heads, d)
    qn = (norm_new * q).sum(axis=-1)
    denom = maximum(qn.abs(), (-m_new).exp())
    h = o_pre.sigmoid() * (numer / denom.reshape(n_b, heads, 1))
    return MLSTMState(mem_new, norm_new, m_new), h


class MLSTMBlock(Module):
    """Pre-norm block: up-projection, causal conv feeding q/k, scan, residual.

    The v path reads the unconvolved up-projection; input/forget gates are
    scalar per head from the convolved branch; the output gate is a sigmoid
    vector gate. A learnable per-channel skip reinjects the conv branch
    after the scan.
    """

    def __init__(self, dim: int, rng: np.random.Generator,
                 heads: int = 4, conv_width: int = 4, up_factor: int = 2):
        inner = dim * up_factor
        if inner % heads != 0:
            raise ShapeError(
                f"MLSTMBlock: inner dim {inner} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.dim_head = inner // heads
        self.inner = inner

        self.norm = LayerNorm(dim)
        self.up = Linear(dim, inner, rng)
        self.conv_kernel = Parameter(kaiming_uniform(rng, (conv_width, inner), conv_width))
        self.conv_bias = Parameter(np.zeros(inner))
        d = self.dim_head
        self.w_q = Parameter(kaiming_uniform(rng, (heads, d, d), d))
        self.w_k = Parameter(kaiming_uniform(rng, (heads, d, d), d))
        self.w_v = Parameter(kaiming_uniform(rng, (heads, d, d), d))
        self.b_q = Parameter(np.zeros((heads, d)))
        self.b_k = Parameter(np.zeros((heads, d)))
        self.b_v = Parameter(np.zeros((heads, d)))
        self.gate_i = Linear(inner, heads, rng)
        self.gate_f = Linear(inner, heads, rng)
        self.gate_o = Linear(inner, inner, rng)
        self.skip = Parameter(np.ones(inner))
        self.down = Linear(inner, dim, rng)

    def _heads(self, x: Tensor, w: Parameter, b: Parameter) -> Tensor:
        """Per-head linear: (N,L,inner) -> (N,L,heads,d) through (heads,d,d) weights."""
        n, length, _ = x.shape
        xh = x.reshape(n, length, self.heads, 1, self.dim_head)
        return (xh @ w).reshape(n, length, self.heads, self.dim_head) + b

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.dim:
            raise ShapeError(
                f"MLSTMBlock: expected (N,L,{self.dim}) input, got {x.shape}")
        n, length, _ = x.shape
        u = self.up(self.norm(x))
        c = causal_conv1d(u, self.conv_kernel, self.conv_bias).silu()
        q = self._heads(c, self.w_q, self.b_q)
        k = self._heads(c, self.w_k, self.b_k)
        v = self._heads(u, self.w_v, self.b_v)
        i_pre = self.gate_i(c)
        f_pre = self.gate_f(c)
        o_pre = self.gate_o(u).reshape(n, length, self.heads, self.dim_head)

        state = initial_state(n, self.heads, self.dim_head)
        hs = []
        for t in range(length):
            state, h = mlstm_step(state, q[:, t], k[:, t], v[:, t],
                                  i_pre[:, t], f_pre[:, t], o_pre[:, t])
            hs.append(h)
        h_seq = stack(hs, axis=1).reshape(n, length, self.inner)
        h_seq = h_seq + self.skip * c
        return x + self.down(h_seq)


class BiMLSTM(Module):
    """Bidirectional scan with one shared block: B(x) + reverse(B(reverse(x)))."""

    def __init__(self, dim: int, rng: np.random.Generator, heads: int = 4):
        self.block = MLSTMBlock(dim, rng, heads=heads)

    def forward(self, seq: Tensor) -> Tensor:
        forward = self.block(seq)
        backward = self.block(seq.flip(1)).flip(1)
        return forward + backward
