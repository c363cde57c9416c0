"""Reverse-mode automatic differentiation on a dynamic tape.

Tensors wrap float64 numpy arrays.  Each operation that sees at least one
gradient-requiring input appends a node to an implicit tape (creation order
doubles as a topological order, since inputs always precede outputs).
``backward`` walks reachable nodes in reverse creation order and accumulates
gradients additively, so shared subexpressions receive contributions from
every consumer.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError, NumericError

_GRAD_ENABLED = True
_TENSOR_COUNTER = 0


class no_grad:
    """Context manager that suspends tape recording (inference, FD probes)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """A float64 array with an optional gradient and tape linkage.

    ``grad`` is allocated (zero) exactly when ``requires_grad`` is set and
    accumulates additively across backward passes until explicitly zeroed.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd", "_tid")

    def __init__(self, data, requires_grad: bool = False):
        global _TENSOR_COUNTER
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents: tuple = ()
        self._bwd = None
        _TENSOR_COUNTER += 1
        self._tid = _TENSOR_COUNTER

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _result(data, parents, bwd) -> Tensor:
    """Build an op output, recording tape linkage only when useful."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._parents = tuple(parents)
        out._bwd = bwd
        return out
    return Tensor(data)


def backward(loss: Tensor):
    """Backpropagate from a scalar loss through the reachable graph."""
    if loss.data.ndim != 0:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        raise ContractError("backward called on a tensor that requires no grad")
    nodes = []
    seen = set()
    stack = [loss]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        stack.extend(node._parents)
    nodes.sort(key=lambda t: t._tid, reverse=True)
    # op outputs restart from zero each pass; leaves (parameters, inputs)
    # accumulate across passes
    for node in nodes:
        if node._bwd is not None and node.grad is not None:
            node.grad[...] = 0.0
    loss.grad += 1.0
    for node in nodes:
        if node._bwd is not None:
            node._bwd(node.grad)


# ---------------------------------------------------------------------------
# elementwise and reduction ops


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"add shapes differ: {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        if a.requires_grad:
            a.grad += g
        if b.requires_grad:
            b.grad += g

    return _result(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"sub shapes differ: {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        if a.requires_grad:
            a.grad += g
        if b.requires_grad:
            b.grad -= g

    return _result(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"mul shapes differ: {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        if a.requires_grad:
            a.grad += g * b.data
        if b.requires_grad:
            b.grad += g * a.data

    return _result(a.data * b.data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd(g):
        if a.requires_grad:
            a.grad += g * c

    return _result(a.data * c, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product covering 2dx2d, 2dx1d, 1dx2d and 1dx1d (dot)."""
    an, bn = a.data.ndim, b.data.ndim
    if an not in (1, 2) or bn not in (1, 2):
        raise DimensionError(f"matmul supports 1-D/2-D, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")

    def bwd(g):
        if an == 2 and bn == 2:
            if a.requires_grad:
                a.grad += g @ b.data.T
            if b.requires_grad:
                b.grad += a.data.T @ g
        elif an == 2 and bn == 1:
            if a.requires_grad:
                a.grad += np.outer(g, b.data)
            if b.requires_grad:
                b.grad += a.data.T @ g
        elif an == 1 and bn == 2:
            if a.requires_grad:
                a.grad += b.data @ g
            if b.requires_grad:
                b.grad += np.outer(a.data, g)
        else:
            if a.requires_grad:
                a.grad += g * b.data
            if b.requires_grad:
                b.grad += g * a.data

    return _result(a.data @ b.data, (a, b), bwd)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bwd(g):
        if a.requires_grad:
            a.grad += g * (1.0 - y * y)

    return _result(y, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    y = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def bwd(g):
        if a.requires_grad:
            a.grad += g * y * (1.0 - y)

    return _result(y, (a,), bwd)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NumericError("log of non-positive value")

    def bwd(g):
        if a.requires_grad:
            a.grad += g / a.data

    return _result(np.log(a.data), (a,), bwd)


def total(a: Tensor) -> Tensor:
    """Sum of all elements, as a 0-d tensor."""

    def bwd(g):
        if a.requires_grad:
            a.grad += g

    return _result(a.data.sum(), (a,), bwd)


def softmax(a: Tensor) -> Tensor:
    """Stable softmax over a 1-D tensor."""
    if a.data.ndim != 1:
        raise DimensionError(f"softmax expects a vector, got shape {a.data.shape}")
    if not np.all(np.isfinite(a.data)):
        raise NumericError("softmax input contains non-finite values")
    z = a.data - a.data.max()
    e = np.exp(z)
    p = e / e.sum()

    def bwd(g):
        if a.requires_grad:
            a.grad += p * (g - np.dot(g, p))

    return _result(p, (a,), bwd)


def cross_entropy(probs: Tensor, target: int) -> Tensor:
    """Negative log-probability of ``target`` under a probability vector.

    The picked probability is floored at 1e-12 so padded or underflowed
    entries cannot produce infinities.
    """
    if probs.data.ndim != 1:
        raise DimensionError(f"cross_entropy expects a vector, got shape {probs.data.shape}")
    if not 0 <= target < probs.data.shape[0]:
        raise IndexError(f"target {target} out of range for {probs.data.shape[0]} classes")
    p = max(float(probs.data[target]), 1e-12)

    def bwd(g):
        if probs.requires_grad:
            probs.grad[target] -= float(g) / p

    return _result(-np.log(p), (probs,), bwd)


def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    for p in parts:
        if p.data.ndim != 1:
            raise DimensionError(f"concat expects vectors, got shape {p.data.shape}")
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.grad += g[lo:hi]

    return _result(np.concatenate([p.data for p in parts]), tuple(parts), bwd)


def stack(rows: list[Tensor]) -> Tensor:
    """Stack 1-D tensors into a (len, dim) matrix."""
    for r in rows:
        if r.data.ndim != 1:
            raise DimensionError(f"stack expects vectors, got shape {r.data.shape}")

    def bwd(g):
        for i, r in enumerate(rows):
            if r.requires_grad:
                r.grad += g[i]

    return _result(np.stack([r.data for r in rows]), tuple(rows), bwd)


def row(mat: Tensor, index: int) -> Tensor:
    """Select one row of a matrix (embedding lookup)."""
    if mat.data.ndim != 2:
        raise DimensionError(f"row expects a matrix, got shape {mat.data.shape}")
    if not 0 <= index < mat.data.shape[0]:
        raise IndexError(f"row {index} out of range for {mat.data.shape[0]} rows")

    def bwd(g):
        if mat.requires_grad:
            mat.grad[index] += g

    return _result(mat.data[index].copy(), (mat,), bwd)


def mean_rows(mat: Tensor) -> Tensor:
    """Mean over the rows of a (n, d) matrix."""
    if mat.data.ndim != 2:
        raise DimensionError(f"mean_rows expects a matrix, got shape {mat.data.shape}")
    n = mat.data.shape[0]

    def bwd(g):
        if mat.requires_grad:
            mat.grad += g / n

    return _result(mat.data.mean(axis=0), (mat,), bwd)


def numeric_gradient(fn, x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar-valued fn w.r.t. tensor x.

    ``fn`` is re-invoked after perturbing x.data in place, under no_grad.
    """
    grad = np.zeros_like(x.data)
    flat = x.data.ravel()
    gflat = grad.ravel()
    with no_grad():
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = float(fn())
            flat[i] = keep - h
            down = float(fn())
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * h)
    return grad
