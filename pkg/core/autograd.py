"""
Reverse-mode differentiation over numpy arrays.

Every op here is polymorphic: called with plain arrays it returns a plain numpy
result, called with at least one `Tensor` it records a node on the tape. The
manifold and filter code is written once against these functions and serves both
the numeric checks and model training.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit, logsumexp as _logsumexp

VJP = Callable[[np.ndarray], np.ndarray]


class Tensor:
    """A float64 array that remembers how it was computed."""

    __array_ufunc__ = None  # numpy defers binary operators to us

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple[tuple["Tensor", VJP], ...] = ()

    # -- array-ish surface ------------------------------------------------
    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    @property
    def T(self):
        return transpose(self)

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    # -- backward pass ----------------------------------------------------
    def backward(self, grad=None) -> None:
        """Accumulate d(self)/d(leaf) into `.grad` of every leaf that requires it."""
        if grad is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.value)
        order = _topological_order(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, vjp in node._parents:
                pg = vjp(g)
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


# -----------------------------
# Helpers
# -----------------------------

def is_tensor(*xs) -> bool:
    return any(isinstance(x, Tensor) for x in xs)


def value_of(x):
    """Plain numpy view of a tensor (or the input itself)."""
    return x.value if isinstance(x, Tensor) else x


def parameter(value, name: Optional[str] = None) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    shape = tuple(shape)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _node(value, *edges) -> Tensor:
    parents = tuple(
        (p, fn) for p, fn in edges if isinstance(p, Tensor) and p.requires_grad
    )
    out = Tensor(value, requires_grad=bool(parents))
    out._parents = parents
    return out


def _unary(x, value, local_grad: Callable[[], np.ndarray]):
    """Elementwise op whose derivative is `local_grad()` (evaluated lazily)."""
    return _node(value, (x, lambda g: g * local_grad()))


# -----------------------------
# Arithmetic
# -----------------------------

def add(a, b):
    va, vb = value_of(a), value_of(b)
    if not is_tensor(a, b):
        return va + vb
    sa, sb = np.shape(va), np.shape(vb)
    return _node(va + vb, (a, lambda g: unbroadcast(g, sa)), (b, lambda g: unbroadcast(g, sb)))


def sub(a, b):
    va, vb = value_of(a), value_of(b)
    if not is_tensor(a, b):
        return va - vb
    sa, sb = np.shape(va), np.shape(vb)
    return _node(va - vb, (a, lambda g: unbroadcast(g, sa)), (b, lambda g: unbroadcast(-g, sb)))


def mul(a, b):
    va, vb = value_of(a), value_of(b)
    if not is_tensor(a, b):
        return va * vb
    sa, sb = np.shape(va), np.shape(vb)
    return _node(
        va * vb,
        (a, lambda g: unbroadcast(g * vb, sa)),
        (b, lambda g: unbroadcast(g * va, sb)),
    )


def div(a, b):
    va, vb = value_of(a), value_of(b)
    if not is_tensor(a, b):
        return va / vb
    sa, sb = np.shape(va), np.shape(vb)
    return _node(
        va / vb,
        (a, lambda g: unbroadcast(g / vb, sa)),
        (b, lambda g: unbroadcast(-g * va / (vb * vb), sb)),
    )


def neg(x):
    if not is_tensor(x):
        return -x
    return _node(-x.value, (x, lambda g: -g))


def matmul(a, b):
    va, vb = value_of(a), value_of(b)
    if not is_tensor(a, b):
        return va @ vb
    va, vb = np.asarray(va), np.asarray(vb)

    def grad_a(g):
        if vb.ndim == 1:
            return np.outer(g, vb)
        if va.ndim == 1:
            return vb @ g
        return g @ vb.T

    def grad_b(g):
        if va.ndim == 1:
            return np.outer(va, g)
        return va.T @ g

    return _node(va @ vb, (a, grad_a), (b, grad_b))


def power(x, p: float):
    if not is_tensor(x):
        return np.power(x, p)
    v = x.value
    return _unary(x, v ** p, lambda: p * v ** (p - 1))


# -----------------------------
# Elementwise functions
# -----------------------------

def exp(x):
    if not is_tensor(x):
        return np.exp(x)
    out = np.exp(x.value)
    return _unary(x, out, lambda: out)


def log(x):
    if not is_tensor(x):
        return np.log(x)
    v = x.value
    return _unary(x, np.log(v), lambda: 1.0 / v)


def sqrt(x):
    if not is_tensor(x):
        return np.sqrt(x)
    out = np.sqrt(x.value)
    return _unary(x, out, lambda: 0.5 / out)


def tanh(x):
    if not is_tensor(x):
        return np.tanh(x)
    out = np.tanh(x.value)
    return _unary(x, out, lambda: 1.0 - out * out)


def arctanh(x):
    if not is_tensor(x):
        return np.arctanh(x)
    v = x.value
    return _unary(x, np.arctanh(v), lambda: 1.0 / (1.0 - v * v))


def tan(x):
    if not is_tensor(x):
        return np.tan(x)
    out = np.tan(x.value)
    return _unary(x, out, lambda: 1.0 + out * out)


def arctan(x):
    if not is_tensor(x):
        return np.arctan(x)
    v = x.value
    return _unary(x, np.arctan(v), lambda: 1.0 / (1.0 + v * v))


def cos(x):
    if not is_tensor(x):
        return np.cos(x)
    v = x.value
    return _unary(x, np.cos(v), lambda: -np.sin(v))


def sin(x):
    if not is_tensor(x):
        return np.sin(x)
    v = x.value
    return _unary(x, np.sin(v), lambda: np.cos(v))


def abs(x):
    if not is_tensor(x):
        return np.abs(x)
    v = x.value
    return _unary(x, np.abs(v), lambda: np.sign(v))


def sigmoid(x):
    if not is_tensor(x):
        return expit(x)
    out = expit(x.value)
    return _unary(x, out, lambda: out * (1.0 - out))


def softplus(x):
    if not is_tensor(x):
        return np.logaddexp(0.0, x)
    v = x.value
    return _unary(x, np.logaddexp(0.0, v), lambda: expit(v))


def relu(x):
    if not is_tensor(x):
        return np.maximum(x, 0.0)
    v = x.value
    return _unary(x, np.maximum(v, 0.0), lambda: (v > 0.0).astype(np.float64))


def maximum(x, floor: float):
    """Elementwise max against a constant floor."""
    if not is_tensor(x):
        return np.maximum(x, floor)
    v = x.value
    return _unary(x, np.maximum(v, floor), lambda: (v >= floor).astype(np.float64))


def where(cond, a, b):
    """`cond` is a plain boolean array; gradients flow to the selected branch."""
    cond = np.asarray(value_of(cond), dtype=bool)
    va, vb = value_of(a), value_of(b)
    if not is_tensor(a, b):
        return np.where(cond, va, vb)
    sa, sb = np.shape(va), np.shape(vb)
    return _node(
        np.where(cond, va, vb),
        (a, lambda g: unbroadcast(np.where(cond, g, 0.0), sa)),
        (b, lambda g: unbroadcast(np.where(cond, 0.0, g), sb)),
    )


# -----------------------------
# Reductions and shape ops
# -----------------------------

def _expand(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x, axis=None, keepdims=False):
    if not is_tensor(x):
        return np.sum(x, axis=axis, keepdims=keepdims)
    shape = x.shape
    return _node(
        np.sum(x.value, axis=axis, keepdims=keepdims),
        (x, lambda g: np.array(_expand(g, shape, axis, keepdims))),
    )


def mean(x, axis=None, keepdims=False):
    v = value_of(x)
    count = np.size(v) if axis is None else np.shape(v)[axis]
    return div(sum(x, axis=axis, keepdims=keepdims), float(count))


def norm(x, axis=-1, keepdims=False):
    """Euclidean norm; the gradient at the zero vector is taken as zero."""
    if not is_tensor(x):
        return np.linalg.norm(x, axis=axis, keepdims=keepdims)
    v = x.value
    n = np.linalg.norm(v, axis=axis, keepdims=True)

    def vjp(g):
        g = g if keepdims else np.expand_dims(g, axis)
        safe = np.where(n > 0.0, n, 1.0)
        return np.where(n > 0.0, g * v / safe, 0.0)

    out = n if keepdims else np.squeeze(n, axis=axis)
    return _node(out, (x, vjp))


def logsumexp(x, axis=None, keepdims=False):
    if not is_tensor(x):
        return _logsumexp(x, axis=axis, keepdims=keepdims)
    v = x.value
    full = _logsumexp(v, axis=axis, keepdims=True)
    soft = np.exp(v - full)

    def vjp(g):
        return _expand(g, v.shape, axis, keepdims) * soft

    out = full if keepdims else (np.squeeze(full, axis=axis) if axis is not None else full.reshape(()))
    return _node(out, (x, vjp))


def softmax(x, axis=-1):
    return exp(sub(x, logsumexp(x, axis=axis, keepdims=True)))


def _is_basic_index(idx) -> bool:
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (int, slice)) or p is Ellipsis for p in parts)


def getitem(x, idx):
    if not is_tensor(x):
        return x[idx]
    shape = x.shape

    def vjp(g):
        full = np.zeros(shape)
        if _is_basic_index(idx):
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        return full

    return _node(x.value[idx], (x, vjp))


def reshape(x, shape):
    if not is_tensor(x):
        return np.reshape(x, shape)
    original = x.shape
    return _node(np.reshape(x.value, shape), (x, lambda g: np.reshape(g, original)))


def transpose(x):
    if not is_tensor(x):
        return np.transpose(x)
    return _node(np.transpose(x.value), (x, lambda g: np.transpose(g)))


def concatenate(xs: Sequence, axis: int = -1):
    if not is_tensor(*xs):
        return np.concatenate(xs, axis=axis)
    values = [np.asarray(value_of(x)) for x in xs]
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]

    def make_vjp(i):
        return lambda g: np.split(g, bounds, axis=axis)[i]

    return _node(np.concatenate(values, axis=axis), *[(x, make_vjp(i)) for i, x in enumerate(xs)])


def stack(xs: Sequence, axis: int = 0):
    if not is_tensor(*xs):
        return np.stack(xs, axis=axis)
    values = [np.asarray(value_of(x)) for x in xs]

    def make_vjp(i):
        return lambda g: np.take(g, i, axis=axis)

    return _node(np.stack(values, axis=axis), *[(x, make_vjp(i)) for i, x in enumerate(xs)])
