"""Minimal reverse-mode automatic differentiation on dense float64
arrays, plus the Adam optimizer and an exact-round-trip checkpoint
format. This is the numeric substrate for the graph classifier and the
mask explainer; it supports exactly the operations those need.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class Tensor:
    """A float64 array with an optional gradient buffer.

    Tensors produced by operations remember their parents and a backward
    closure; calling :func:`backward` on a scalar loss accumulates
    gradients into every reachable tensor with ``requires_grad``.
    """

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value, parents, backward_fn) -> Tensor:
    out = Tensor(value)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor) -> None:
    """Reverse-mode accumulation from a scalar loss.

    Traversal order is the deterministic reverse of the construction
    order reachable from the loss.
    """
    if loss.value.size != 1:
        raise ValueError("backward needs a scalar loss")
    if not loss.requires_grad:
        raise ValueError("gradient requested on a detached node")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad:
                stack.append((p, False))
    loss._accumulate(np.ones_like(loss.value))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise and linear-algebra operations


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))
    return _make(a.value + b.value, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))
    return _make(a.value - b.value, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))
    return _make(a.value * b.value, (a, b), back)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.value / b.value**2, b.shape))
    return _make(a.value / b.value, (a, b), back)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    def back(g):
        a._accumulate(-g)
    return _make(-a.value, (a,), back)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    def back(g):
        if a.requires_grad:
            a._accumulate(g @ b.value.T)
        if b.requires_grad:
            b._accumulate(a.value.T @ g)
    return _make(a.value @ b.value, (a, b), back)


def power(a, exponent: float) -> Tensor:
    a = _as_tensor(a)
    def back(g):
        a._accumulate(g * exponent * a.value ** (exponent - 1.0))
    return _make(a.value**exponent, (a,), back)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.value > 0
    def back(g):
        a._accumulate(g * mask)
    return _make(np.where(mask, a.value, 0.0), (a,), back)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.value
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    def back(g):
        a._accumulate(g * out * (1.0 - out))
    return _make(out, (a,), back)


def logsigmoid(a) -> Tensor:
    """log(sigmoid(x)) computed stably (never -inf for finite input)."""
    a = _as_tensor(a)
    x = a.value
    out = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                   x - np.log1p(np.exp(-np.abs(x))))
    sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    def back(g):
        a._accumulate(g * (1.0 - sig))
    return _make(out, (a,), back)


def log(a) -> Tensor:
    a = _as_tensor(a)
    def back(g):
        a._accumulate(g / a.value)
    return _make(np.log(a.value), (a,), back)


def tsum(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    def back(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape).copy())
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.shape).copy())
    return _make(a.value.sum(axis=axis), (a,), back)


def tmean(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    def back(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape) / count)
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.shape) / count)
    return _make(a.value.mean(axis=axis), (a,), back)


def tmax(a, axis: int) -> Tensor:
    """Max along an axis; ties route the gradient to the lowest index."""
    a = _as_tensor(a)
    idx = a.value.argmax(axis=axis)  # argmax picks the first maximum
    def back(g):
        buf = np.zeros_like(a.value)
        np.put_along_axis(
            buf, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis
        )
        a._accumulate(buf)
    return _make(a.value.max(axis=axis), (a,), back)


def concat(parts: list, axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    sizes = [p.value.shape[axis] for p in parts]
    def back(g):
        offset = 0
        for p, size in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + size)
            if p.requires_grad:
                p._accumulate(g[tuple(sl)])
            offset += size
    return _make(np.concatenate([p.value for p in parts], axis=axis), tuple(parts), back)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    def back(g):
        a._accumulate(g.reshape(a.shape))
    return _make(a.value.reshape(shape), (a,), back)


def gather_rows(a, indices) -> Tensor:
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=int)
    def back(g):
        buf = np.zeros_like(a.value)
        np.add.at(buf, idx, g)
        a._accumulate(buf)
    return _make(a.value[idx], (a,), back)


def gather_submatrix(a, indices) -> Tensor:
    """Select rows and columns of a square matrix by the same index list."""
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=int)
    def back(g):
        buf = np.zeros_like(a.value)
        buf[np.ix_(idx, idx)] = g
        a._accumulate(buf)
    return _make(a.value[np.ix_(idx, idx)], (a,), back)


def scatter_symmetric(values, pairs, n: int) -> Tensor:
    """Build an (n, n) symmetric matrix from per-edge values.

    ``pairs`` is a list of (i, j) index tuples with i != j; entry (i, j)
    and (j, i) both receive values[k].
    """
    values = _as_tensor(values)
    mat = np.zeros((n, n))
    for k, (i, j) in enumerate(pairs):
        mat[i, j] = mat[j, i] = values.value[k]
    def back(g):
        out = np.array([g[i, j] + g[j, i] for i, j in pairs])
        values._accumulate(out)
    return _make(mat, (values,), back)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    x = a.value
    shifted = x - x.max(axis=axis, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - logsum
    soft = np.exp(out)
    def back(g):
        a._accumulate(g - soft * g.sum(axis=axis, keepdims=True))
    return _make(out, (a,), back)


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class AdamState:
    """Adam moments for a fixed parameter list."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], learning_rate: float = 0.001) -> "AdamState":
        state = cls(learning_rate=learning_rate)
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
        return state


def adam_step(params: list[Tensor], state: AdamState) -> None:
    """Standard Adam update with bias correction; skips missing grads."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for k, p in enumerate(params):
        g = p.grad
        if g is None:
            continue
        if g.shape != p.value.shape:
            raise ValueError("gradient / parameter shape mismatch")
        state.m[k] = b1 * state.m[k] + (1 - b1) * g
        state.v[k] = b2 * state.v[k] + (1 - b2) * g * g
        m_hat = state.m[k] / (1 - b1**t)
        v_hat = state.v[k] / (1 - b2**t)
        p.value -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


def sgd_step(params: list[Tensor], learning_rate: float) -> None:
    for p in params:
        if p.grad is not None:
            p.value -= learning_rate * p.grad


def zero_grads(params: list[Tensor]) -> None:
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def save_tensors(path, named: dict[str, np.ndarray]) -> None:
    """Versioned JSON checkpoint; float64 values round-trip exactly."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "tensors": {
            name: {"shape": list(arr.shape), "data": np.asarray(arr, float).ravel().tolist()}
            for name, arr in named.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    return {
        name: np.array(entry["data"], dtype=float).reshape(entry["shape"])
        for name, entry in doc["tensors"].items()
    }
