"""DLRM-lite: bottom MLP, pairwise dot interaction, two-layer top MLP.

Gradients are derived by hand for this fixed architecture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.errors import InvalidArgument, StateError


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def bce_from_logits(logits, labels) -> float:
    """Mean binary cross-entropy, computed stably from logits."""
    return float(np.mean(np.logaddexp(0.0, logits) - labels * logits))


@dataclass
class ForwardCache:
    version: int
    ids: np.ndarray
    x: np.ndarray
    pre0: np.ndarray
    h0: np.ndarray
    vecs: np.ndarray
    u: np.ndarray
    pre1: np.ndarray
    a1: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


class DlrmLite:
    """Dense features go through one ReLU layer to width ``d``; the ``k``
    field embeddings and that vector interact through all pairwise dot
    products; the top net maps ``[h0, dots]`` through a ReLU hidden layer
    to one logit.
    """

    def __init__(self, k: int, d: int, dense_dim: int, hidden: int = 32, seed: int = 0, dtype=np.float32):
        if k < 1 or d < 1 or dense_dim < 0 or hidden < 1:
            raise InvalidArgument("need k, d, hidden >= 1 and dense_dim >= 0")
        self.k, self.d, self.dense_dim, self.hidden = int(k), int(d), int(dense_dim), int(hidden)
        self.dtype = np.dtype(dtype)
        self.pairs = np.triu_indices(self.k + 1, 1)
        width = d + self.n_pairs
        rng = np.random.default_rng(seed)

        def he(shape, fan_in):
            return (rng.standard_normal(shape) * np.sqrt(2.0 / max(fan_in, 1))).astype(self.dtype)

        self.params = {
            "W0": he((d, dense_dim), dense_dim),
            "b0": np.zeros(d, self.dtype),
            "W1": he((hidden, width), width),
            "b1": np.zeros(hidden, self.dtype),
            "W2": he((1, hidden), hidden) * np.asarray(0.5, self.dtype),
            "b2": np.zeros(1, self.dtype),
        }
        self.version = 0
        self._slots: dict[str, dict] = {}

    @property
    def n_pairs(self) -> int:
        return self.k * (self.k + 1) // 2

    def parameter_bytes(self) -> int:
        return int(sum(p.size for p in self.params.values())) * 4

    def zero_(self) -> "DlrmLite":
        for p in self.params.values():
            p[...] = 0
        self.version += 1
        return self

    # -- forward / backward -----------------------------------------------------------

    def forward(self, store, ids, dense) -> tuple[np.ndarray, ForwardCache]:
        ids = np.asarray(ids)
        x = np.asarray(dense, dtype=self.dtype)
        if ids.ndim != 2 or ids.shape[1] != self.k:
            raise InvalidArgument(f"ids must have shape (batch, {self.k}), got {ids.shape}")
        if x.shape != (ids.shape[0], self.dense_dim):
            raise InvalidArgument(f"dense features must have shape ({ids.shape[0]}, {self.dense_dim}), got {x.shape}")
        if store.d != self.d:
            raise InvalidArgument(f"store width {store.d} != model width {self.d}")
        p = self.params
        b = ids.shape[0]
        emb = store.lookup(ids.ravel()).astype(self.dtype, copy=False).reshape(b, self.k, self.d)
        pre0 = x @ p["W0"].T + p["b0"]
        h0 = np.maximum(pre0, 0)
        vecs = np.concatenate([h0[:, None, :], emb], axis=1)
        gram = np.einsum("bid,bjd->bij", vecs, vecs)
        dots = gram[:, self.pairs[0], self.pairs[1]]
        u = np.concatenate([h0, dots], axis=1)
        pre1 = u @ p["W1"].T + p["b1"]
        a1 = np.maximum(pre1, 0)
        logits = (a1 @ p["W2"].T)[:, 0] + p["b2"][0]
        probs = sigmoid(logits)
        cache = ForwardCache(self.version, ids, x, pre0, h0, vecs, u, pre1, a1, logits, probs)
        return probs, cache

    def predict(self, store, ids, dense, batch_size: int = 8192) -> np.ndarray:
        out = [self.forward(store, ids[s:s + batch_size], dense[s:s + batch_size])[0]
               for s in range(0, len(ids), batch_size)]
        return np.concatenate(out) if out else np.zeros(0, self.dtype)

    def loss(self, cache: ForwardCache, labels) -> float:
        return bce_from_logits(cache.logits.astype(np.float64), np.asarray(labels, np.float64))

    def backward(self, cache: ForwardCache, labels) -> tuple[dict, np.ndarray]:
        """Gradients of the mean BCE: ``(param_grads, embedding_grads)``.

        Embedding gradients have shape ``(batch * k, d)``, aligned with
        ``cache.ids.ravel()``.
        """
        if cache.version != self.version:
            raise StateError("forward cache is stale: parameters changed since it was computed")
        labels = np.asarray(labels, dtype=self.dtype)
        p = self.params
        b = labels.size
        dlogit = (cache.probs - labels) / b
        g = {"W2": dlogit[None, :] @ cache.a1, "b2": np.array([dlogit.sum()], self.dtype)}
        dpre1 = (dlogit[:, None] * p["W2"]) * (cache.pre1 > 0)
        g["W1"] = dpre1.T @ cache.u
        g["b1"] = dpre1.sum(axis=0)
        du = dpre1 @ p["W1"]
        dsym = np.zeros((b, self.k + 1, self.k + 1), dtype=du.dtype)
        dsym[:, self.pairs[0], self.pairs[1]] = du[:, self.d:]
        dsym += dsym.transpose(0, 2, 1)
        dvecs = np.einsum("bij,bjd->bid", dsym, cache.vecs)
        dpre0 = (du[:, :self.d] + dvecs[:, 0]) * (cache.pre0 > 0)
        g["W0"] = dpre0.T @ cache.x
        g["b0"] = dpre0.sum(axis=0)
        g = {name: v.astype(self.dtype, copy=False) for name, v in g.items()}
        return g, dvecs[:, 1:].reshape(b * self.k, self.d)

    def apply_gradients(self, grads: dict, opt) -> None:
        for name, grad in grads.items():
            opt.update(self.params[name], grad, self._slots.setdefault(name, {}))
        self.version += 1
