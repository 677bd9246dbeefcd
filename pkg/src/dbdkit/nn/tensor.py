"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray and records the operations that produced it, so a
scalar loss can backpropagate exact gradients to every parameter. The op set
is deliberately small: exactly what the encoder blocks and classifier heads
in this package need. Everything runs on CPU in whatever float dtype the
inputs carry (float64 for gradient checks, float32 for larger training runs).
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = ["Tensor", "concat", "matmul", "conv1d_same", "index_select"]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # ------------------------------------------------------------------ util

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    @staticmethod
    def _make(data: np.ndarray, parents: Sequence["Tensor"], backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient requires a scalar tensor")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accum(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ------------------------------------------------------------ arithmetic

    @staticmethod
    def _coerce(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(np.asarray(other))

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self, other
        out_data = a.data + b.data

        def backward(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.data.shape))

        return Tensor._make(out_data, (a, b), backward)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward(g):
            a._accum(-g)

        return Tensor._make(-a.data, (a,), backward)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other
        out_data = a.data * b.data

        def backward(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._make(out_data, (a, b), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        return self * other.pow(-1.0)

    def __rtruediv__(self, other):
        return self._coerce(other) * self.pow(-1.0)

    def pow(self, exponent: float):
        a = self
        out_data = a.data ** exponent

        def backward(g):
            a._accum(g * exponent * a.data ** (exponent - 1.0))

        return Tensor._make(out_data, (a,), backward)

    def sqrt(self):
        return self.pow(0.5)

    def __matmul__(self, other):
        return matmul(self, self._coerce(other))

    # ---------------------------------------------------------- elementwise

    def tanh(self):
        a = self
        out_data = np.tanh(a.data)

        def backward(g):
            a._accum(g * (1.0 - out_data * out_data))

        return Tensor._make(out_data, (a,), backward)

    def sigmoid(self):
        a = self
        out_data = 1.0 / (1.0 + np.exp(-a.data))

        def backward(g):
            a._accum(g * out_data * (1.0 - out_data))

        return Tensor._make(out_data, (a,), backward)

    def relu(self):
        a = self
        out_data = np.maximum(a.data, 0.0)

        def backward(g):
            a._accum(g * (a.data > 0.0))

        return Tensor._make(out_data, (a,), backward)

    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def backward(g):
            a._accum(g * out_data)

        return Tensor._make(out_data, (a,), backward)

    def log(self):
        a = self

        def backward(g):
            a._accum(g / a.data)

        return Tensor._make(np.log(a.data), (a,), backward)

    # ----------------------------------------------------------- reductions

    def sum(self, axis=None, keepdims: bool = False):
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is None:
                a._accum(np.broadcast_to(g, a.data.shape).copy())
                return
            if not keepdims:
                g = np.expand_dims(g, axis)
            a._accum(np.broadcast_to(g, a.data.shape).copy())

        return Tensor._make(out_data, (a,), backward)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            n = 1
            for ax in axes:
                n *= self.data.shape[ax]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def max(self, axis: int, keepdims: bool = False):
        a = self
        out_data = a.data.max(axis=axis, keepdims=keepdims)

        def backward(g):
            expanded = out_data if keepdims else np.expand_dims(out_data, axis)
            mask = (a.data == expanded)
            # split gradient equally across ties so finite differences agree
            counts = mask.sum(axis=axis, keepdims=True)
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accum(mask * (gg / counts))

        return Tensor._make(out_data, (a,), backward)

    # --------------------------------------------------------------- softmax

    def softmax(self, axis: int = -1, mask: np.ndarray | None = None):
        """Normalized exponential along `axis`.

        `mask` (same shape, 1 = valid, 0 = ignored) excludes positions
        exactly: their output weight is 0.0 and they receive no gradient.
        """
        a = self
        x = a.data
        if mask is not None:
            neg = np.where(mask > 0, x, -np.inf)
            m = neg.max(axis=axis, keepdims=True)
            e = np.exp(np.where(mask > 0, x - m, -np.inf))
            e = np.where(mask > 0, e, 0.0)
        else:
            m = x.max(axis=axis, keepdims=True)
            e = np.exp(x - m)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            a._accum(out_data * (g - dot))

        return Tensor._make(out_data, (a,), backward)

    def log_softmax(self, axis: int = -1):
        a = self
        m = a.data.max(axis=axis, keepdims=True)
        shifted = a.data - m
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out_data = shifted - lse
        soft = np.exp(out_data)

        def backward(g):
            a._accum(g - soft * g.sum(axis=axis, keepdims=True))

        return Tensor._make(out_data, (a,), backward)

    # ------------------------------------------------------------- reshaping

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old = a.data.shape

        def backward(g):
            a._accum(g.reshape(old))

        return Tensor._make(a.data.reshape(shape), (a,), backward)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        a = self
        inv = np.argsort(axes)

        def backward(g):
            a._accum(g.transpose(inv))

        return Tensor._make(a.data.transpose(axes), (a,), backward)

    def swapaxes(self, ax1: int, ax2: int):
        axes = list(range(self.data.ndim))
        axes[ax1], axes[ax2] = axes[ax2], axes[ax1]
        return self.transpose(*axes)

    def __getitem__(self, key):
        a = self
        out_data = a.data[key]

        def backward(g):
            full = np.zeros_like(a.data)
            np.add.at(full, key, g)
            a._accum(full)

        return Tensor._make(out_data, (a,), backward)


# ---------------------------------------------------------------- functions


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product supporting 2-D weights and batched (ND @ ND) inputs."""
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a._accum(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            if gb.shape != b.data.shape:
                gb = gb.sum(axis=tuple(range(gb.ndim - b.data.ndim)))
            b._accum(gb)

    return Tensor._make(out_data, (a, b), backward)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    ts = list(tensors)
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, start, stop in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(start, stop)
                t._accum(g[tuple(idx)])

    return Tensor._make(out_data, ts, backward)


def index_select(source: Tensor, indices: np.ndarray) -> Tensor:
    """Gather rows of a 2-D tensor; gradient scatter-adds back."""
    idx = np.asarray(indices)
    out_data = source.data[idx]

    def backward(g):
        full = np.zeros_like(source.data)
        np.add.at(full, idx, g)
        source._accum(full)

    return Tensor._make(out_data, (source,), backward)


def conv1d_same(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """1-D convolution over time with zero same-padding.

    x: (B, T, C_in); weight: (K, C_in, C_out); bias: (C_out,).
    Output (B, T, C_out); output frame t reads input frames t-(K-1)/2..t+(K-1)/2.
    """
    B, T, Cin = x.data.shape
    K, Cin_w, Cout = weight.data.shape
    if Cin != Cin_w:
        raise ValueError(f"conv1d_same: input has {Cin} channels, weight expects {Cin_w}")
    half = (K - 1) // 2
    padded = np.zeros((B, T + K - 1, Cin), dtype=x.data.dtype)
    padded[:, half:half + T] = x.data
    # im2col: (B, T, K*Cin) then one GEMM against (K*Cin, Cout)
    windows = np.lib.stride_tricks.sliding_window_view(padded, K, axis=1)  # (B, T, Cin, K)
    col = np.ascontiguousarray(windows.transpose(0, 1, 3, 2)).reshape(B * T, K * Cin)
    w2 = weight.data.reshape(K * Cin, Cout)
    out = col @ w2
    if bias is not None:
        out = out + bias.data
    out_data = out.reshape(B, T, Cout)

    def backward(g):
        g2 = g.reshape(B * T, Cout)
        if weight.requires_grad:
            weight._accum((col.T @ g2).reshape(K, Cin, Cout))
        if bias is not None and bias.requires_grad:
            bias._accum(g2.sum(axis=0))
        if x.requires_grad:
            gcol = (g2 @ w2.T).reshape(B, T, K, Cin)
            gpad = np.zeros_like(padded)
            for k in range(K):
                gpad[:, k:k + T] += gcol[:, :, k, :]
            x._accum(gpad[:, half:half + T])

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(out_data, parents, backward)
