"""Adadelta and gradient clipping."""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .params import ParameterStore


class Adadelta:
    """Adadelta with decaying squared-gradient and squared-update accumulators.

    update = -(RMS[dx] / RMS[g]) * g with RMS[v] = sqrt(E[v^2] + eps).
    The squared-gradient average is refreshed before the update is formed;
    the squared-update average after.  Gradients are zeroed once applied.
    """

    def __init__(self, store: ParameterStore, rho: float = 0.95, eps: float = 1e-6):
        if not 0.0 <= rho < 1.0:
            raise ContractError(f"rho must lie in [0, 1), got {rho}")
        if eps <= 0.0:
            raise ContractError(f"eps must be positive, got {eps}")
        self.store = store
        self.rho = rho
        self.eps = eps
        self.sq_grad = {n: np.zeros_like(t.data) for n, t in store.items()}
        self.sq_delta = {n: np.zeros_like(t.data) for n, t in store.items()}

    def step(self):
        rho, eps = self.rho, self.eps
        for name, t in self.store.items():
            if t.grad is None:
                raise ContractError(f"parameter {name!r} has no gradient")
            g = t.grad
            eg = self.sq_grad[name]
            ed = self.sq_delta[name]
            eg *= rho
            eg += (1.0 - rho) * g * g
            delta = -np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
            ed *= rho
            ed += (1.0 - rho) * delta * delta
            t.data += delta
            g[...] = 0.0


def clip_gradients(store: ParameterStore, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    sq = 0.0
    for t in store.tensors():
        if t.grad is not None:
            sq += float(np.dot(t.grad.ravel(), t.grad.ravel()))
    norm = float(np.sqrt(sq))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for t in store.tensors():
            if t.grad is not None:
                t.grad *= factor
    return norm
