"""Structured differentiable operations on NCHW tensors.

conv2d and bilinear_upsample carry hand-written backward passes; everything
else in the package composes out of the primitives in `tensor`. Both are
exercised against brute-force oracles and finite differences in the tests.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, ShapeError, _node, as_tensor, no_grad


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """2-D cross-correlation of an (N,C,H,W) input with an (O,C/g,kh,kw) kernel.

    Supports stride, symmetric zero padding and grouped/depthwise kernels.
    Differentiable with respect to input, weight and bias.
    """
    if x.ndim != 4:
        raise ShapeError(f"conv2d: input must be 4-D (N,C,H,W), got ndim {x.ndim}")
    if weight.ndim != 4:
        raise ShapeError(f"conv2d: weight must be 4-D, got ndim {weight.ndim}")
    n, c, h, w = x.shape
    c_out, c_g, kh, kw = weight.shape
    if c % groups != 0:
        raise ShapeError(f"conv2d: input channels {c} not divisible by groups {groups}")
    if c_out % groups != 0:
        raise ShapeError(f"conv2d: output channels {c_out} not divisible by groups {groups}")
    if c_g != c // groups:
        raise ShapeError(
            f"conv2d: weight expects {c_g} channels per group, input provides {c // groups}")
    if stride < 1:
        raise ShapeError(f"conv2d: stride must be >= 1, got {stride}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < kh or wp < kw:
        raise ShapeError(
            f"conv2d: padded input {hp}x{wp} smaller than kernel {kh}x{kw}")
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    xg = win.reshape(n, groups, c_g, h_out, w_out, kh, kw)
    wg = weight.data.reshape(groups, c_out // groups, c_g, kh, kw)
    out_data = np.einsum("ngchwij,gocij->ngohw", xg, wg, optimize=True)
    out_data = out_data.reshape(n, c_out, h_out, w_out)
    if bias is not None:
        if bias.shape != (c_out,):
            raise ShapeError(
                f"conv2d: bias shape {bias.shape} does not match output channels {c_out}")
        out_data = out_data + bias.data[None, :, None, None]

    parents = (x, weight) if bias is None else (x, weight, bias)
    out = _node(out_data, parents)
    if out._parents:
        def bw():
            g = out.grad
            gg = g.reshape(n, groups, c_out // groups, h_out, w_out)
            if weight.requires_grad:
                weight._accumulate(
                    np.einsum("ngchwij,ngohw->gocij", xg, gg, optimize=True)
                    .reshape(weight.shape))
            if bias is not None and bias.requires_grad:
                bias._accumulate(g.sum(axis=(0, 2, 3)))
            if x.requires_grad:
                dcols = np.einsum("gocij,ngohw->ngchwij", wg, gg, optimize=True)
                dcols = dcols.reshape(n, c, h_out, w_out, kh, kw)
                dxp = np.zeros((n, c, hp, wp))
                for i in range(kh):
                    for j in range(kw):
                        dxp[:, :, i:i + stride * h_out:stride,
                            j:j + stride * w_out:stride] += dcols[..., i, j]
                if padding:
                    dxp = dxp[:, :, padding:-padding, padding:-padding]
                x._accumulate(dxp)
        out._backward = bw
    return out


def _interp_matrix(n_in: int, factor: int) -> np.ndarray:
    """1-D bilinear interpolation matrix (half-pixel centers, edges clamped)."""
    n_out = n_in * factor
    src = (np.arange(n_out) + 0.5) / factor - 0.5
    i0 = np.floor(src).astype(int)
    t = src - i0
    lo = np.clip(i0, 0, n_in - 1)
    hi = np.clip(i0 + 1, 0, n_in - 1)
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(mat, (rows, lo), 1.0 - t)
    np.add.at(mat, (rows, hi), t)
    return mat


def bilinear_upsample(x: Tensor, factor: int) -> Tensor:
    """Upsample an (N,C,H,W) map by an integer factor with bilinear weights."""
    if x.ndim != 4:
        raise ShapeError(f"bilinear_upsample: expected 4-D input, got ndim {x.ndim}")
    if not isinstance(factor, int) or factor < 1:
        raise ShapeError(f"bilinear_upsample: factor must be an integer >= 1, got {factor}")
    if factor == 1:
        return x
    _, _, h, w = x.shape
    ay = _interp_matrix(h, factor)
    ax = _interp_matrix(w, factor)
    tmp = np.einsum("oh,nchw->ncow", ay, x.data, optimize=True)
    out_data = np.einsum("pw,ncow->ncop", ax, tmp, optimize=True)
    out = _node(out_data, (x,))
    if out._parents:
        def bw():
            t = np.einsum("pw,ncop->ncow", ax, out.grad, optimize=True)
            x._accumulate(np.einsum("oh,ncow->nchw", ay, t, optimize=True))
        out._backward = bw
    return out


def axial_avgpool(x: Tensor, axis: str) -> Tensor:
    """Mean over one spatial axis of an (N,C,H,W) map, kept as size 1.

    axis="height" collapses H (leaving a row profile); axis="width"
    collapses W (leaving a column profile).
    """
    if x.ndim != 4:
        raise ShapeError(f"axial_avgpool: expected 4-D input, got ndim {x.ndim}")
    if axis == "height":
        return x.mean(axis=2, keepdims=True)
    if axis == "width":
        return x.mean(axis=3, keepdims=True)
    raise ValueError(f"axial_avgpool: axis must be 'height' or 'width', got {axis!r}")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Shift-stabilized softmax; exact gradient despite the detached shift."""
    shift = Tensor(x.data.max(axis=axis, keepdims=True))
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def grad_check(f, x: Tensor, eps: float = 1e-5, max_coords: int | None = None,
               seed: int = 0) -> float:
    """Compare analytic gradients of a scalar function against central differences.

    Runs f(x) once with the graph enabled to collect x.grad, then perturbs
    x.data in place coordinate by coordinate. Returns the maximum relative
    error max|a - n| / max(|a|, |n|, 1e-8) over the checked coordinates.
    When max_coords is given and smaller than x.size, a deterministic random
    subset of coordinates is checked (keeps large checks inside a time budget).
    """
    if not (1e-6 <= eps <= 1e-3):
        raise ValueError(f"grad_check: eps must lie in [1e-6, 1e-3], got {eps}")
    x.requires_grad = True
    x.zero_grad()
    y = f(x)
    if y.size != 1:
        raise ValueError(f"grad_check: f must be scalar-valued, got shape {y.shape}")
    y.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    flat = x.data.reshape(-1)
    n = flat.size
    if max_coords is not None and max_coords < n:
        idxs = np.random.default_rng(seed).choice(n, size=max_coords, replace=False)
    else:
        idxs = np.arange(n)

    worst = 0.0
    with no_grad():
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            up = f(x).item()
            flat[i] = orig - eps
            down = f(x).item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            a = analytic.reshape(-1)[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
