"""Magnitude pruning with a cubic density schedule (DeepLight style)."""

from __future__ import annotations

import math

import numpy as np

from ..core.errors import InvalidArgument
from ..core.memory import F32, INDEX
from ..core.sparse import SparseRows
from .base import DEFAULT_INIT_STD, EmbeddingStore, normal_init


def scheduled_density(target: float, position: float) -> float:
    """Cubic decay from 1 at position 0 to ``target`` at position 1."""
    position = min(max(float(position), 0.0), 1.0)
    return target + (1.0 - target) * (1.0 - position) ** 3


class PrunedTable(EmbeddingStore):
    """Dense FP32 shadow during training, CSR/COO payload after freezing.

    The mask is implicit: a pruned entry is exactly zero in the weights and
    in both optimizer moments, and its gradient is discarded. A per-row
    int32 count of surviving entries is the only auxiliary structure.
    """

    kind = "pruned"

    def __init__(self, n, d, target_density=1.0, seed=0, dtype=np.float32,
                 init_std=DEFAULT_INIT_STD, weight=None, sparse: SparseRows | None = None):
        super().__init__(n, d, dtype)
        if not 0.0 < target_density <= 1.0:
            raise InvalidArgument(f"target density must lie in (0, 1], got {target_density}")
        self.target_density = float(target_density)
        self.sparse = sparse
        self.weight = None
        if sparse is None:
            if weight is None:
                weight = normal_init(np.random.default_rng(seed), (n, d), init_std, self.dtype)
            self.weight = np.array(weight, dtype=self.dtype)
        self.pruning = False
        self.row_counts = np.full(n, d, dtype=np.int32)

    @property
    def nnz(self) -> int:
        if self.sparse is not None:
            return self.sparse.nnz
        return int(np.count_nonzero(self.weight))

    def _lookup(self, ids):
        if self.sparse is not None:
            return self.sparse.gather(ids, self.dtype)
        return self.weight[ids]

    def parameters(self):
        return {} if self.weight is None else {"weight": self.weight}

    def _grads(self, ids, grads):
        if self.pruning:
            grads = grads * (self.weight[ids] != 0)
        return {"weight": (ids, grads)}

    def prune_step(self, target_density: float | None = None, position: float = 1.0) -> int:
        """Zero the smallest-magnitude entries down to the scheduled density.

        Returns the number of entries kept. Ties are broken by flat index so
        the lower index survives. Never revives an entry.
        """
        if self.weight is None:
            raise InvalidArgument("store already frozen to sparse form")
        target = self.target_density if target_density is None else float(target_density)
        if not 0.0 < target <= 1.0:
            raise InvalidArgument(f"target density must lie in (0, 1], got {target}")
        total = self.n * self.d
        keep = math.floor(scheduled_density(target, position) * total + 1e-9)
        flat = self.weight.reshape(-1)
        alive = np.flatnonzero(flat)
        if alive.size <= keep:
            return int(alive.size)
        self.pruning = True
        mag = np.abs(flat[alive])
        order = np.lexsort((alive, -mag))
        drop = alive[order[keep:]]
        flat[drop] = 0
        slot = self._slots.get("weight", {})
        for name in ("m", "v"):
            if name in slot:
                slot[name].reshape(-1)[drop] = 0
        self.row_counts = np.count_nonzero(self.weight, axis=1).astype(np.int32)
        return keep

    def freeze(self):
        if self.weight is not None:
            self.sparse = SparseRows.from_dense(self.weight)
            self.weight = None
        return super().freeze()

    def inference_bytes(self):
        if self.sparse is not None:
            return self.sparse.nbytes()
        from ..core.memory import sparse_bytes

        return sparse_bytes(self.n, self.d, self.nnz)[1]

    def parameter_bytes(self):
        return self.n * self.d * F32

    def auxiliary_bytes(self):
        return self.n * INDEX

    def training_bytes(self, moments: int = 2) -> int:
        # the dense shadow, not the sparse payload, is resident while training
        return (1 + moments) * self.parameter_bytes() + self.auxiliary_bytes()

    def _meta(self):
        fmt = self.sparse.fmt if self.sparse is not None else None
        return {"n": self.n, "d": self.d, "target_density": self.target_density, "format": fmt}

    def to_container(self):
        sparse = self.sparse if self.sparse is not None else SparseRows.from_dense(self.weight)
        meta = dict(self._meta(), format=sparse.fmt)
        from ..core.checkpoint import Container

        return Container(self.kind, meta, sparse.arrays())

    @classmethod
    def from_container(cls, c):
        m = c.meta
        sparse = SparseRows.from_arrays(m["format"], (m["n"], m["d"]), c.arrays)
        return cls(m["n"], m["d"], target_density=m["target_density"], sparse=sparse).freeze()
