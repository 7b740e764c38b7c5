"""Reverse-mode automatic differentiation over numpy arrays.

Every value is a `Tensor` wrapping a float64 ndarray. Operations build a
computation graph of backward closures; `Tensor.backward()` on a scalar
replays the graph in reverse topological order and accumulates gradients
into every reachable tensor with ``requires_grad`` set. Gradients from
multiple uses of the same tensor add.

All computation is double precision. The graph walk is iterative, so
sequence scans of thousands of steps do not hit the recursion limit.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (forward-only mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled() -> bool:
    return _grad_enabled


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array with an optional gradient and graph lineage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward: Callable[[], None] | None = None

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_err(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph machinery -----------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        g = _unbroadcast(g, self.data.shape)
        self.grad = g.copy() if self.grad is None else self.grad + g

    def backward(self) -> None:
        """Populate grads of every requires_grad tensor reachable from self.

        Only scalar (size-1) tensors may seed a backward pass.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar tensor, got shape {self.shape}")
        # Iterative post-order DFS: children (inputs) come before consumers.
        topo: list[Tensor] = []
        visited = {id(self)}
        stack: list[tuple[Tensor, int]] = [(self, 0)]
        while stack:
            node, i = stack.pop()
            if i < len(node._parents):
                stack.append((node, i + 1))
                parent = node._parents[i]
                if id(parent) not in visited:
                    visited.add(id(parent))
                    stack.append((parent, 0))
            else:
                topo.append(node)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        _check_broadcast(self, other, "add")
        out = _node(self.data + other.data, (self, other))
        if out._parents:
            def bw():
                self._accumulate(out.grad)
                other._accumulate(out.grad)
            out._backward = bw
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        _check_broadcast(self, other, "sub")
        out = _node(self.data - other.data, (self, other))
        if out._parents:
            def bw():
                self._accumulate(out.grad)
                other._accumulate(-out.grad)
            out._backward = bw
        return out

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        _check_broadcast(self, other, "mul")
        out = _node(self.data * other.data, (self, other))
        if out._parents:
            def bw():
                self._accumulate(out.grad * other.data)
                other._accumulate(out.grad * self.data)
            out._backward = bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        _check_broadcast(self, other, "div")
        out = _node(self.data / other.data, (self, other))
        if out._parents:
            def bw():
                self._accumulate(out.grad / other.data)
                other._accumulate(-out.grad * self.data / (other.data * other.data))
            out._backward = bw
        return out

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        out = _node(-self.data, (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(-out.grad)
        return out

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("pow supports constant exponents only")
        out = _node(self.data ** p, (self,))
        if out._parents:
            # d(x^p)/dx = p * x^(p-1)
            out._backward = lambda: self._accumulate(
                out.grad * p * self.data ** (p - 1))
        return out

    def exp(self):
        out = _node(np.exp(self.data), (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(out.grad * out.data)
        return out

    def log(self):
        out = _node(np.log(self.data), (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(out.grad / self.data)
        return out

    def abs(self):
        out = _node(np.abs(self.data), (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(out.grad * np.sign(self.data))
        return out

    def sigmoid(self):
        """Logistic function, numerically stable, output strictly in (0,1)."""
        x = self.data
        s = np.empty_like(x)
        pos = x >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        s[~pos] = ex / (1.0 + ex)
        # clamp so saturated inputs stay inside the open interval
        np.clip(s, np.finfo(np.float64).tiny, np.nextafter(1.0, 0.0), out=s)
        out = _node(s, (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(out.grad * s * (1.0 - s))
        return out

    def silu(self):
        """x * sigmoid(x), the smooth gate used for all activations."""
        s = _sigmoid_data(self.data)
        out = _node(self.data * s, (self,))
        if out._parents:
            # d/dx = s * (1 + x * (1 - s))
            out._backward = lambda: self._accumulate(
                out.grad * s * (1.0 + self.data * (1.0 - s)))
        return out

    def softplus(self):
        """log(1 + exp(x)) evaluated in the overflow-safe split form."""
        x = self.data
        out = _node(np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))), (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(out.grad * _sigmoid_data(x))
        return out

    # -- reductions ------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = _node(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out._parents:
            def bw():
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(g, self.data.shape))
            out._backward = bw
        return out

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))

    # -- shape manipulation ------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _node(self.data.reshape(shape), (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(
                out.grad.reshape(self.data.shape))
        return out

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        out = _node(self.data.transpose(axes), (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(out.grad.transpose(inv))
        return out

    def flip(self, axis: int):
        out = _node(np.flip(self.data, axis=axis), (self,))
        if out._parents:
            out._backward = lambda: self._accumulate(np.flip(out.grad, axis=axis))
        return out

    def __getitem__(self, idx):
        out = _node(self.data[idx], (self,))
        if out._parents:
            def bw():
                g = np.zeros_like(self.data)
                g[idx] = out.grad
                self._accumulate(g)
            out._backward = bw
        return out

    # -- linear algebra -----------------------------------------------------

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError("matmul requires operands with ndim >= 2")
        out = _node(np.matmul(self.data, other.data), (self, other))
        if out._parents:
            def bw():
                g = out.grad
                self._accumulate(np.matmul(g, other.data.swapaxes(-1, -2)))
                other._accumulate(np.matmul(self.data.swapaxes(-1, -2), g))
            out._backward = bw
        return out


def _scalar_err(t: Tensor):
    raise ValueError(f"item() requires a size-1 tensor, got shape {t.shape}")


def _sigmoid_data(x: np.ndarray) -> np.ndarray:
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    return s


def _node(data: np.ndarray, parents: tuple) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.shape} and {b.shape} are not broadcastable") from None


# -- free functions ---------------------------------------------------------


def maximum(a, b) -> Tensor:
    """Elementwise maximum; at ties the gradient routes to the first operand."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "maximum")
    out = _node(np.maximum(a.data, b.data), (a, b))
    if out._parents:
        def bw():
            mask = a.data >= b.data
            a._accumulate(out.grad * mask)
            b._accumulate(out.grad * ~mask)
        out._backward = bw
    return out


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        for d in range(len(ref)):
            if d != (axis % len(ref)) and t.shape[d] != ref[d]:
                raise ShapeError(
                    f"concat: dimension {d} differs ({t.shape[d]} vs {ref[d]})")
    out = _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out._parents:
        sizes = [t.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def bw():
            pieces = np.split(out.grad, offsets[1:-1], axis=axis)
            for t, piece in zip(tensors, pieces):
                t._accumulate(piece)
        out._backward = bw
    return out


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Channel-axis concatenation of two NCHW maps."""
    if a.ndim != 4 or b.ndim != 4:
        raise ShapeError("concat_channels expects 4-D (N,C,H,W) tensors")
    return concat([a, b], axis=1)


def stack(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = list(tensors)
    out = _node(np.stack([t.data for t in tensors], axis=axis), tuple(tensors))
    if out._parents:
        def bw():
            for i, t in enumerate(tensors):
                t._accumulate(np.take(out.grad, i, axis=axis))
        out._backward = bw
    return out


def zeros(*shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float64))
