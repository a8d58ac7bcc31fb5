"""Dense tensors with tape-free reverse-mode differentiation.

Each op records its parents and a closure mapping the output gradient to
parent gradients. ``Tensor.backward`` walks the recorded graph in reverse
topological order and accumulates into ``.grad``.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(values)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.values = arr
        self.requires_grad = requires_grad
        self.name = name
        self._grad = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- basic properties ---------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.values)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        self._grad = value

    def zero_grad(self) -> None:
        self._grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    # -- differentiation ----------------------------------------------------
    def backward(self) -> None:
        if self.values.size != 1:
            raise ValueError(f"backward() needs a scalar, got shape {self.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.values)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if like is not None:
        return Tensor(np.asarray(x, dtype=like.dtype))
    return Tensor(x)


def _pair(a, b) -> tuple[Tensor, Tensor]:
    # plain numbers/arrays take the dtype of the tensor operand
    if isinstance(a, Tensor):
        return a, as_tensor(b, a)
    if isinstance(b, Tensor):
        return as_tensor(a, b), b
    return as_tensor(a), as_tensor(b)


def _result(values, parents, backward) -> Tensor:
    out = Tensor(values)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


# -- elementwise -------------------------------------------------------------
def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _result(a.values + b.values, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _result(a.values - b.values, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _result(a.values * b.values, (a, b),
                   lambda g: (_unbroadcast(g * b.values, a.shape),
                              _unbroadcast(g * a.values, b.shape)))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.values)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = 0.5 * (1.0 + np.tanh(0.5 * a.values))
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


# -- linear algebra / shape ---------------------------------------------------
def matmul(a, b) -> Tensor:
    a, b = _pair(a, b)
    av, bv = a.values, b.values

    def backward(g):
        if bv.ndim == 1:
            ga = np.multiply.outer(g, bv) if av.ndim > 1 else g * bv
            gb = (av * g[..., None]).reshape(-1, av.shape[-1]).sum(axis=0) if av.ndim > 1 else g * av
            return _unbroadcast(ga, a.shape), gb
        if av.ndim == 1:
            ga = g @ np.swapaxes(bv, -1, -2)
            gb = av[:, None] * g[..., None, :]
            return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(av @ bv, (a, b), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _result(a.values.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def swapaxes(a, i, j) -> Tensor:
    a = as_tensor(a)
    return _result(np.swapaxes(a.values, i, j), (a,), lambda g: (np.swapaxes(g, i, j),))


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(a.values.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.values.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis, keepdims), 1.0 / n)


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result(np.concatenate([t.values for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    n = len(tensors)
    return _result(np.stack([t.values for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.take(g, i, axis=axis) for i in range(n)))


def index(a, key) -> Tensor:
    """``a[key]`` for any numpy index; repeated indices accumulate gradient."""
    a = as_tensor(a)

    def backward(g):
        out = np.zeros_like(a.values)
        np.add.at(out, key, g)
        return (out,)

    return _result(a.values[key], (a,), backward)


def segment_sum(a, segment_ids, num_segments: int) -> Tensor:
    """Sum rows of ``a`` into ``num_segments`` buckets along axis 0."""
    a = as_tensor(a)
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    out = np.zeros((num_segments,) + a.shape[1:], dtype=a.dtype)
    np.add.at(out, segment_ids, a.values)
    return _result(out, (a,), lambda g: (g[segment_ids],))


# -- normalizations -----------------------------------------------------------
def masked_softmax(x, mask=None, axis=-1) -> Tensor:
    """Softmax over ``axis`` restricted to positions where ``mask`` is True.

    Masked positions get exactly zero weight and their input values are
    never read; a slice with no valid position yields all zeros.
    """
    x = as_tensor(x)
    v = x.values
    if mask is None:
        mask = np.ones(v.shape, dtype=bool)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), v.shape)
    safe = np.where(mask, v, -np.inf)
    mx = np.max(safe, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.where(mask, np.exp(np.where(mask, v - mx, 0.0)), 0.0)
    s = e.sum(axis=axis, keepdims=True)
    p = e / np.where(s > 0, s, 1.0)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return _result(p, (x,), backward)


def softmax(x, axis=-1) -> Tensor:
    return masked_softmax(x, None, axis)


def log_softmax(x, axis=-1) -> Tensor:
    x = as_tensor(x)
    v = x.values
    mx = v.max(axis=axis, keepdims=True)
    lse = mx + np.log(np.exp(v - mx).sum(axis=axis, keepdims=True))
    y = v - lse
    p = np.exp(y)
    return _result(y, (x,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))
