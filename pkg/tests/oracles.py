"""Independent reference implementations used by the tests.

Each oracle is deliberately naive (pair enumeration, finite differences,
full sorts) so that it shares no code path with the library.
"""

from __future__ import annotations

import numpy as np

from embcompress.core.features import FeatureSpace
from embcompress.model import DlrmLite
from embcompress.stores import (
    AdaptiveTable,
    AlptTable,
    CodecStore,
    CompoTable,
    DoubleHashTable,
    Fp16Table,
    FullTable,
    MEmComTable,
    MixedDimTable,
    PrunedTable,
    QuantizedTable,
    RobeArray,
    TtRecTable,
)

F64 = np.float64


def auc_pairs(scores, labels) -> float:
    """AUC by enumerating every positive/negative pair; ties count one half."""
    scores = np.asarray(scores, dtype=F64)
    labels = np.asarray(labels)
    pos, neg = scores[labels == 1], scores[labels == 0]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (pos.size * neg.size))


def topk_sorted(matrix, queries, k):
    """Top-k row sets by a full stable sort of negated scores."""
    scores = np.asarray(queries, F64) @ np.asarray(matrix, F64).T
    return [set(np.argsort(-row, kind="stable")[:k]) for row in scores]


def prune_keep_by_sort(matrix, keep):
    """Entries kept by magnitude pruning: largest |w| first, ties by flat index."""
    flat = np.abs(np.asarray(matrix, F64)).ravel()
    order = np.lexsort((np.arange(flat.size), -flat))
    mask = np.zeros(flat.size, bool)
    mask[order[:keep]] = True
    return mask.reshape(np.shape(matrix))


# -- gradient checking ---------------------------------------------------------

SPACE = FeatureSpace((20, 15, 10))  # n = 45
D = 4


def _upcast(store):
    """Promote float32 bookkeeping arrays (affine scales) to float64 so that
    finite differences are measured at 64-bit precision."""
    for name in ("scale", "bias"):
        value = getattr(store, name, None)
        if isinstance(value, np.ndarray) and value.dtype == np.float32:
            setattr(store, name, value.astype(F64))
    return store


def grad_stores(space: FeatureSpace = SPACE, d: int = D, upcast: bool = True) -> dict:
    """One float64 instance of every trainable store type."""
    n = space.n
    kw = {"seed": 3, "dtype": F64, "init_std": 0.3}
    stores = {
        "full": FullTable(n, d, **kw),
        "double_hash": DoubleHashTable(n, d, 7, **kw),
        "compo": CompoTable(n, d, 7, 7, **kw),
        "memcom": MEmComTable(n, d, 9, **kw),
        "robe": RobeArray(n, d, 23, chunk=2, **kw),
        "tt_rec": TtRecTable(n, d, [5, 9], [2, 2], [3], **kw),
        "int8": QuantizedTable(n, d, bits=8, granularity="row", **kw),
        "int16_table": QuantizedTable(n, d, bits=16, granularity="table", **kw),
        "fp16": Fp16Table(n, d, **kw),
        "alpt": AlptTable(n, d, bits=8, **kw),
        "mde": MixedDimTable(space, d, [4, 3, 2], **kw),
        "pruned": PrunedTable(n, d, target_density=0.5, **kw),
        "codec_store": CodecStore(n, d, "magpq", {"parts": 2, "base_k": 2, "groups": 2}, **kw),
    }
    adapt = AdaptiveTable(n, d, 6, threshold=2, capacity=8, overflow="stop", **kw)
    adapt.observe_and_promote(np.repeat(np.arange(0, n, 5), 2))
    adapt.exclusive[:] = np.random.default_rng(1).standard_normal(adapt.exclusive.shape) * 0.3
    stores["adapt"] = adapt
    stores["pruned"].prune_step(0.5)
    return {name: _upcast(s) if upcast else s for name, s in stores.items()}


def grad_batch(space: FeatureSpace = SPACE, batch: int = 6, dense_dim: int = 3, seed: int = 0):
    rng = np.random.default_rng(seed)
    ids = np.stack([rng.integers(lo, lo + c, size=batch) for lo, c in zip(space.offsets, space.cardinalities)],
                   axis=1)
    dense = rng.standard_normal((batch, dense_dim))
    labels = (rng.random(batch) < 0.5).astype(F64)
    return ids, dense, labels


def grad_model(space: FeatureSpace = SPACE, d: int = D, dense_dim: int = 3) -> DlrmLite:
    model = DlrmLite(space.k, d, dense_dim, hidden=6, seed=5, dtype=F64)
    # biases away from zero keep ReLU inputs off their kinks
    model.params["b0"][:] = 0.3
    model.params["b1"][:] = 0.3
    return model


def _loss(model, store, ids, dense, labels):
    _, cache = model.forward(store, ids, dense)
    return model.loss(cache, labels)


def _rel(a, b) -> float:
    a, b = np.asarray(a, F64), np.asarray(b, F64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def fd_gradient(fn, array, eps=1e-6, mask=None):
    """Central differences of scalar ``fn()`` w.r.t. every entry of ``array``
    (perturbed in place), optionally restricted to ``mask``.

    The step is relative to the entry's magnitude (floored at 0.01) so that
    tiny quantization scales multiplying large codes are not overshot.
    """
    out = np.zeros(array.shape, F64)
    flat = array.reshape(-1)
    todo = range(flat.size) if mask is None else np.flatnonzero(np.ravel(mask))
    for i in todo:
        keep = flat[i]
        h = eps * max(abs(keep), 1e-2)
        flat[i] = keep + h
        up = fn()
        flat[i] = keep - h
        down = fn()
        flat[i] = keep
        out.reshape(-1)[i] = (up - down) / (2 * h)
    return out


class _Fixed:
    """Stand-in store returning fixed vectors, to differentiate w.r.t. the lookup output."""

    def __init__(self, d, vectors):
        self.d, self.vectors = d, vectors

    def lookup(self, ids):
        return self.vectors


def gradient_errors(model, store, ids, dense, labels) -> dict:
    """Relative errors between analytic and finite-difference gradients for
    the model parameters, the looked-up vectors and the store parameters."""
    errors = {}
    _, cache = model.forward(store, ids, dense)
    grads, emb_grads = model.backward(cache, labels)

    def loss():
        return _loss(model, store, ids, dense, labels)

    for name, param in model.params.items():
        errors[f"model.{name}"] = _rel(grads[name], fd_gradient(loss, param))

    vectors = store.lookup(ids.ravel()).astype(F64).copy()
    fixed = _Fixed(store.d, vectors)
    errors["lookup"] = _rel(emb_grads, fd_gradient(lambda: _loss(model, fixed, ids, dense, labels), vectors))

    analytic = store.parameter_grads(ids.ravel(), emb_grads)
    for name, param in store.parameters().items():
        if param.size == 0:
            continue
        # pruned entries are structurally zero; only live weights are trainable
        mask = (param != 0) if getattr(store, "pruning", False) and name == "weight" else None
        numeric = fd_gradient(loss, param, mask=mask)
        got = analytic[name] if mask is None else np.where(mask, analytic[name], 0.0)
        errors[f"store.{name}"] = _rel(got, numeric)
    return errors
