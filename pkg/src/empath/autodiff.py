"""Reverse-mode autodiff over dense numpy tensors.

Small tape-based engine: each op records a backward closure on its output.
Float64 throughout so finite-difference checks have headroom. Single-threaded
per tape; tensors are plain values.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

_grad_enabled = True


class no_grad:
    """Context manager disabling tape recording (forward-only evaluation)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` to undo numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def item(self) -> float:
        return float(self.data)

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._prev = tuple(p for p in parents if p.requires_grad)
            out._backward = backward
        return out

    def backward(self):
        if self.data.ndim != 0 and self.data.size != 1:
            raise ValueError("backward() requires a scalar root")
        topo: list[Tensor] = []
        seen = set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._prev:
                visit(p)
            topo.append(t)

        visit(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._backward is not None:
                t._backward()

    # -- arithmetic ---------------------------------------------------------

    @staticmethod
    def _wrap(x):
        return x if isinstance(x, Tensor) else Tensor(x)

    def __add__(self, other):
        other = Tensor._wrap(other)
        out_data = self.data + other.data

        def bw():
            if self.requires_grad:
                self._accumulate(_unbroadcast(out.grad, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(out.grad, other.shape))

        out = Tensor._make(out_data, (self, other), bw)
        return out

    __radd__ = __add__

    def __neg__(self):
        def bw():
            if self.requires_grad:
                self._accumulate(-out.grad)

        out = Tensor._make(-self.data, (self,), bw)
        return out

    def __sub__(self, other):
        return self + (-Tensor._wrap(other))

    def __rsub__(self, other):
        return Tensor._wrap(other) + (-self)

    def __mul__(self, other):
        other = Tensor._wrap(other)
        out_data = self.data * other.data

        def bw():
            if self.requires_grad:
                self._accumulate(_unbroadcast(out.grad * other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(out.grad * self.data, other.shape))

        out = Tensor._make(out_data, (self, other), bw)
        return out

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor/tensor division not supported; multiply by reciprocal")
        return self * (1.0 / scalar)

    def __matmul__(self, other):
        other = Tensor._wrap(other)
        if self.data.shape[-1] != other.data.shape[0]:
            raise ValueError(
                f"matmul inner dimensions differ: {self.data.shape} @ {other.data.shape}"
            )
        out_data = self.data @ other.data

        a_1d = self.data.ndim == 1
        b_1d = other.data.ndim == 1

        def bw():
            g = out.grad
            if self.requires_grad:
                if b_1d:
                    self._accumulate(np.multiply.outer(g, other.data) if not a_1d else g * other.data)
                else:
                    self._accumulate(g @ other.data.T)
            if other.requires_grad:
                if a_1d:
                    other._accumulate(np.multiply.outer(self.data, g) if not b_1d else g * self.data)
                else:
                    other._accumulate(self.data.T @ g)

        out = Tensor._make(out_data, (self, other), bw)
        return out

    def transpose(self):
        def bw():
            if self.requires_grad:
                self._accumulate(out.grad.T)

        out = Tensor._make(self.data.T, (self,), bw)
        return out

    @property
    def T(self):
        return self.transpose()

    # -- reductions and reshaping ------------------------------------------

    def sum(self):
        def bw():
            if self.requires_grad:
                self._accumulate(np.full_like(self.data, float(out.grad)))

        out = Tensor._make(self.data.sum(), (self,), bw)
        return out

    def mean(self):
        n = self.data.size

        def bw():
            if self.requires_grad:
                self._accumulate(np.full_like(self.data, float(out.grad) / n))

        out = Tensor._make(self.data.mean(), (self,), bw)
        return out

    def reshape(self, *shape):
        old = self.data.shape

        def bw():
            if self.requires_grad:
                self._accumulate(out.grad.reshape(old))

        out = Tensor._make(self.data.reshape(*shape), (self,), bw)
        return out

    def narrow(self, start: int, size: int, axis: int = -1):
        """Contiguous slice along one axis."""
        idx = [slice(None)] * self.data.ndim
        idx[axis] = slice(start, start + size)
        idx = tuple(idx)

        def bw():
            if self.requires_grad:
                g = np.zeros_like(self.data)
                g[idx] = out.grad
                self._accumulate(g)

        out = Tensor._make(self.data[idx], (self,), bw)
        return out

    def row(self, i: int):
        """Select row i of a 2-D tensor as a 1-D tensor."""

        def bw():
            if self.requires_grad:
                g = np.zeros_like(self.data)
                g[i] = out.grad
                self._accumulate(g)

        out = Tensor._make(self.data[i], (self,), bw)
        return out

    def take_rows(self, idx):
        """Select rows by an integer index array (gather)."""
        idx = np.asarray(idx, dtype=np.intp)

        def bw():
            if self.requires_grad:
                g = np.zeros_like(self.data)
                np.add.at(g, idx, out.grad)
                self._accumulate(g)

        out = Tensor._make(self.data[idx], (self,), bw)
        return out


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)

    def bw():
        offset = 0
        for t, s in zip(tensors, sizes):
            if t.requires_grad:
                idx = [slice(None)] * out_data.ndim
                idx[axis] = slice(offset, offset + s)
                t._accumulate(out.grad[tuple(idx)])
            offset += s

    out = Tensor._make(out_data, tuple(tensors), bw)
    return out


def relu(x: Tensor) -> Tensor:
    def bw():
        if x.requires_grad:
            x._accumulate(out.grad * (x.data > 0))

    out = Tensor._make(np.maximum(x.data, 0.0), (x,), bw)
    return out


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    phi = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))

    def bw():
        if x.requires_grad:
            pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT2PI
            x._accumulate(out.grad * (phi + x.data * pdf))

    out = Tensor._make(x.data * phi, (x,), bw)
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max-subtraction) along `axis`."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw():
        if x.requires_grad:
            g = out.grad
            x._accumulate(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    out = Tensor._make(s, (x,), bw)
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv

    def bw():
        g = out.grad
        if gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.shape))
        if bias.requires_grad:
            bias._accumulate(_unbroadcast(g, bias.shape))
        if x.requires_grad:
            n = x.data.shape[-1]
            gx = g * gain.data
            dx = inv * (
                gx
                - gx.mean(axis=-1, keepdims=True)
                - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            )
            x._accumulate(dx)

    out = Tensor._make(xhat * gain.data + bias.data, (x, gain, bias), bw)
    return out


def embedding(weight: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.intp)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.data.shape[0]):
        raise IndexError(f"token id out of range for embedding of size {weight.data.shape[0]}")
    return weight.take_rows(ids)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean of -log softmax(logits)[target] over rows. logits: (n, C)."""
    targets = np.asarray(targets, dtype=np.intp)
    n, c = logits.data.shape
    if targets.shape != (n,):
        raise ValueError(f"targets shape {targets.shape} does not match batch size {n}")
    if targets.size and (targets.min() < 0 or targets.max() >= c):
        raise IndexError(f"target class out of range [0, {c})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    nll = logsumexp - shifted[np.arange(n), targets]
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)

    def bw():
        if logits.requires_grad:
            g = probs.copy()
            g[np.arange(n), targets] -= 1.0
            logits._accumulate(float(out.grad) * g / n)

    out = Tensor._make(nll.mean(), (logits,), bw)
    return out


def dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; caller supplies the RNG so runs stay seed-deterministic."""
    if p <= 0.0:
        return x
    keep = (rng.random(x.data.shape) >= p).astype(np.float64) / (1.0 - p)

    def bw():
        if x.requires_grad:
            x._accumulate(out.grad * keep)

    out = Tensor._make(x.data * keep, (x,), bw)
    return out
