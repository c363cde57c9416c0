"""Recurrent and attention building blocks on the autodiff tape.

The GRU step and the additive attention scorer are single fused tape nodes
with hand-written backward passes; both are covered by finite-difference
checks in the test suite.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, _result
from .errors import DimensionError
from .params import ParameterStore, glorot


class Linear:
    """y = W x + b as one fused node."""

    def __init__(self, store: ParameterStore, prefix: str, out_dim: int, in_dim: int,
                 rng: np.random.Generator, group: str = "theta"):
        self.W = store.add(f"{prefix}.W", glorot(rng, out_dim, in_dim), group)
        self.b = store.add(f"{prefix}.b", np.zeros(out_dim), group)

    def __call__(self, x: Tensor) -> Tensor:
        W, b = self.W, self.b
        if x.data.ndim != 1 or x.data.shape[0] != W.data.shape[1]:
            raise DimensionError(
                f"linear expects input shape ({W.data.shape[1]},), got {x.data.shape}")
        xd = x.data

        def bwd(g):
            if W.requires_grad:
                W.grad += np.outer(g, xd)
            if b.requires_grad:
                b.grad += g
            if x.requires_grad:
                x.grad += W.data.T @ g

        return _result(W.data @ xd + b.data, (x, W, b), bwd)


class Embedding:
    def __init__(self, store: ParameterStore, name: str, n_rows: int, dim: int,
                 rng: np.random.Generator, group: str = "theta"):
        self.table = store.add(name, glorot(rng, n_rows, dim), group)

    def __call__(self, index: int) -> Tensor:
        return ad.row(self.table, index)


class GRUCell:
    """Gated recurrent unit: h' = (1 - z) * h + z * htilde.

    z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
    htilde = tanh(Wh x + Uh (r * h) + bh).  One fused tape node per step.
    """

    def __init__(self, store: ParameterStore, prefix: str, in_dim: int, hidden: int,
                 rng: np.random.Generator, group: str = "theta"):
        self.in_dim = in_dim
        self.hidden = hidden
        self.W = {}
        self.U = {}
        self.b = {}
        for gate in ("z", "r", "h"):
            self.W[gate] = store.add(f"{prefix}.W{gate}", glorot(rng, hidden, in_dim), group)
            self.U[gate] = store.add(f"{prefix}.U{gate}", glorot(rng, hidden, hidden), group)
            self.b[gate] = store.add(f"{prefix}.b{gate}", np.zeros(hidden), group)

    def step(self, x: Tensor, h: Tensor) -> Tensor:
        if x.data.shape != (self.in_dim,):
            raise DimensionError(f"gru input shape {x.data.shape}, expected ({self.in_dim},)")
        if h.data.shape != (self.hidden,):
            raise DimensionError(f"gru state shape {h.data.shape}, expected ({self.hidden},)")
        Wz, Uz, bz = self.W["z"], self.U["z"], self.b["z"]
        Wr, Ur, br = self.W["r"], self.U["r"], self.b["r"]
        Wh, Uh, bh = self.W["h"], self.U["h"], self.b["h"]
        xd, hd = x.data, h.data

        z = _sigmoid(Wz.data @ xd + Uz.data @ hd + bz.data)
        r = _sigmoid(Wr.data @ xd + Ur.data @ hd + br.data)
        rh = r * hd
        ht = np.tanh(Wh.data @ xd + Uh.data @ rh + bh.data)
        out = (1.0 - z) * hd + z * ht

        def bwd(g):
            dht = g * z
            dz = g * (ht - hd)
            dh = g * (1.0 - z)
            dah = dht * (1.0 - ht * ht)
            drh = Uh.data.T @ dah
            dr = drh * hd
            dh += drh * r
            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            if Wh.requires_grad:
                Wh.grad += np.outer(dah, xd)
                Uh.grad += np.outer(dah, rh)
                bh.grad += dah
            if Wz.requires_grad:
                Wz.grad += np.outer(daz, xd)
                Uz.grad += np.outer(daz, hd)
                bz.grad += daz
            if Wr.requires_grad:
                Wr.grad += np.outer(dar, xd)
                Ur.grad += np.outer(dar, hd)
                br.grad += dar
            if x.requires_grad:
                x.grad += Wh.data.T @ dah + Wz.data.T @ daz + Wr.data.T @ dar
            if h.requires_grad:
                h.grad += dh + Uz.data.T @ daz + Ur.data.T @ dar

        parents = (x, h, Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh)
        return _result(out, parents, bwd)


class AdditiveAttention:
    """Single-hidden-layer additive scorer with a softmax over memory rows.

    score_i = v . tanh(W q + U m_i + b).  The U-projection of the memory is
    computed once per sequence (``project``) and reused across steps.
    """

    def __init__(self, store: ParameterStore, prefix: str, query_dim: int, mem_dim: int,
                 att_dim: int, rng: np.random.Generator, group: str = "theta"):
        self.query_dim = query_dim
        self.W = store.add(f"{prefix}.W", glorot(rng, att_dim, query_dim), group)
        self.U = store.add(f"{prefix}.U", glorot(rng, att_dim, mem_dim), group)
        self.v = store.add(f"{prefix}.v", glorot(rng, att_dim, 1)[:, 0], group)
        self.b = store.add(f"{prefix}.b", np.zeros(att_dim), group)

    def project(self, memory: Tensor) -> Tensor:
        """Precompute memory @ U.T for a (T, mem_dim) memory."""
        return ad.matmul(memory, _transpose(self.U))

    def __call__(self, query: Tensor, memory: Tensor, projected: Tensor) -> tuple[Tensor, Tensor]:
        """Return (context, weights) for one query over the memory rows."""
        if query.data.shape != (self.query_dim,):
            raise DimensionError(
                f"attention query shape {query.data.shape}, expected ({self.query_dim},)")
        scores = self._scores(query, projected)
        alpha = ad.softmax(scores)
        context = ad.matmul(alpha, memory)
        return context, alpha

    def _scores(self, query: Tensor, projected: Tensor) -> Tensor:
        W, v, b = self.W, self.v, self.b
        qd = query.data
        wq = W.data @ qd + b.data
        th = np.tanh(projected.data + wq)
        out = th @ v.data

        def bwd(g):
            dth = np.outer(g, v.data)
            dpre = dth * (1.0 - th * th)
            if v.requires_grad:
                v.grad += th.T @ g
            if projected.requires_grad:
                projected.grad += dpre
            dwq = dpre.sum(axis=0)
            if W.requires_grad:
                W.grad += np.outer(dwq, qd)
            if b.requires_grad:
                b.grad += dwq
            if query.requires_grad:
                query.grad += W.data.T @ dwq

        return _result(out, (query, projected, W, v, b), bwd)


def _transpose(t: Tensor) -> Tensor:
    def bwd(g):
        if t.requires_grad:
            t.grad += g.T

    return _result(t.data.T, (t,), bwd)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
