"""Minimal dense float64 tensor library with reverse-mode autodiff.

Just enough machinery for MLP classifiers with softmax cross-entropy:
matmul, broadcast add, relu, sigmoid, elementwise arithmetic, sum.
Gradients accumulate in a fixed topological order so repeated backward
passes over the same graph are bitwise identical.
"""

from __future__ import annotations

import itertools

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class LabelError(ValueError):
    """A class label falls outside [0, num_classes)."""


class GraphError(ValueError):
    """Autodiff graph contract violated (e.g. non-scalar backward root)."""


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


_node_counter = itertools.count()


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by {op}")


class Tensor:
    """A node in the autodiff graph.

    Leaf tensors have no parents; interior nodes carry a closure that
    scatters the incoming adjoint to their parents.
    """

    __slots__ = ("data", "parents", "_backward", "grad", "node_id")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        _check_finite(self.data, "tensor construction")
        self.parents = tuple(parents)
        self._backward = backward
        self.grad = None
        self.node_id = next(_node_counter)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, leaf={not self.parents})"

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __radd__ = __add__
    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# -- primitive ops ------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    out_data = a.data @ b.data
    _check_finite(out_data, "matmul")

    def backward(go):
        return go @ b.data.T, a.data.T @ go

    return Tensor(out_data, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    _check_finite(out_data, "add")

    def backward(go):
        return _unbroadcast(go, a.shape), _unbroadcast(go, b.shape)

    return Tensor(out_data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data - b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    _check_finite(out_data, "sub")

    def backward(go):
        return _unbroadcast(go, a.shape), -_unbroadcast(go, b.shape)

    return Tensor(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    _check_finite(out_data, "mul")

    def backward(go):
        return (_unbroadcast(go * b.data, a.shape),
                _unbroadcast(go * a.data, b.shape))

    return Tensor(out_data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    # Subgradient at exactly 0 is 0.
    out_data = np.maximum(x.data, 0.0)
    mask = x.data > 0.0

    def backward(go):
        return (go * mask,)

    return Tensor(out_data, (x,), backward)


def sigmoid_values(x: np.ndarray) -> np.ndarray:
    """Numerically stable sigmoid on a raw array (no graph).

    Clamped to the open unit interval's representable endpoints so the
    strict (0, 1) range survives float64 rounding at large |x|.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def sigmoid(x: Tensor) -> Tensor:
    out_data = sigmoid_values(x.data)

    def backward(go):
        return (go * out_data * (1.0 - out_data),)

    return Tensor(out_data, (x,), backward)


def tsum(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out_data = np.asarray(x.data.sum())

    def backward(go):
        return (np.full_like(x.data, float(go)),)

    return Tensor(out_data, (x,), backward)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy over a batch of logits [B, C]."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2:
        raise ShapeError(f"logits must be [B, C], got {logits.shape}")
    batch, num_classes = logits.shape
    if batch < 1:
        raise ShapeError("empty batch")
    if labels.shape != (batch,):
        raise ShapeError(f"labels shape {labels.shape} != ({batch},)")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise LabelError(
            f"labels must be in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -log_probs[np.arange(batch), labels].mean()
    _check_finite(np.asarray(loss), "cross_entropy")

    def backward(go):
        probs = np.exp(log_probs)
        probs[np.arange(batch), labels] -= 1.0
        return (probs * (float(go) / batch),)

    return Tensor(loss, (logits,), backward)


# -- backward pass ------------------------------------------------------


def _topo_order(root: Tensor) -> list:
    """Post-order DFS; deterministic given the construction order."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in seen:
            continue
        seen.add(node.node_id)
        stack.append((node, True))
        for parent in node.parents:
            if parent.node_id not in seen:
                stack.append((parent, False))
    return order


def backward(root: Tensor) -> None:
    """Populate .grad for every tensor reachable from a scalar root."""
    if root.data.size != 1:
        raise GraphError(f"backward root must be scalar, got shape {root.shape}")
    order = _topo_order(root)
    for node in order:
        node.grad = np.zeros_like(node.data)
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._backward is None:
            continue
        parent_grads = node._backward(node.grad)
        for parent, pg in zip(node.parents, parent_grads):
            parent.grad = parent.grad + pg


# -- non-autodiff numerics ---------------------------------------------


def std_population(x) -> float:
    """Population standard deviation (divide by n) of all elements."""
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if data.size == 0:
        raise GraphError("std_population of empty tensor")
    if data.max() == data.min():   # constant tensor: exactly 0, no rounding dust
        return 0.0
    return float(np.sqrt(np.mean((data - data.mean()) ** 2)))
