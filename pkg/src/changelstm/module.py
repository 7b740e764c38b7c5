"""Parameter registry and the small set of layers the model is built from."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor, ShapeError
from . import functional as F


class Parameter(Tensor):
    """A trainable tensor; always requires a gradient."""

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


class Module:
    """Base class: child modules and parameters are discovered by attribute walk."""

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{full}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{full}.{i}", item

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def parameter_dict(self) -> dict[str, Parameter]:
        """Name -> parameter map; rejects duplicate names or shared objects."""
        out: dict[str, Parameter] = {}
        seen: set[int] = set()
        for name, p in self.named_parameters():
            if name in out:
                raise ValueError(f"duplicate parameter name: {name}")
            if id(p) in seen:
                raise ValueError(f"parameter registered twice under different names: {name}")
            seen.add(id(p))
            out[name] = p
        return out

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def kaiming_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2d(Module):
    """Convolution layer; weights Kaiming-uniform, biases zero."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, groups: int = 1):
        if in_ch % groups != 0:
            raise ShapeError(f"Conv2d: in_ch {in_ch} not divisible by groups {groups}")
        fan_in = (in_ch // groups) * kernel * kernel
        self.weight = Parameter(
            kaiming_uniform(rng, (out_ch, in_ch // groups, kernel, kernel), fan_in))
        self.bias = Parameter(np.zeros(out_ch))
        self.stride = stride
        self.padding = padding
        self.groups = groups

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias,
                        stride=self.stride, padding=self.padding, groups=self.groups)


class DSConv(Module):
    """Depthwise 3x3 (pad 1) followed by a pointwise 1x1, both with bias."""

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator):
        self.depthwise = Conv2d(in_ch, in_ch, 3, rng, padding=1, groups=in_ch)
        self.pointwise = Conv2d(in_ch, out_ch, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.pointwise(self.depthwise(x))


class Linear(Module):
    """Affine map over the last axis: y = x @ weight + bias."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.weight = Parameter(kaiming_uniform(rng, (in_dim, out_dim), in_dim))
        self.bias = Parameter(np.zeros(out_dim))

    def forward(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class LayerNorm(Module):
    """Normalization over the last axis with learnable scale and shift."""

    def __init__(self, dim: int, eps: float = 1e-5):
        self.scale = Parameter(np.ones(dim))
        self.shift = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        normed = centered * (var + self.eps) ** -0.5
        return normed * self.scale + self.shift
