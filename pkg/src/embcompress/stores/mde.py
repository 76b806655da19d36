"""Mixed-dimension embeddings: per-field widths with projections back to d."""

from __future__ import annotations

import numpy as np

from ..core.errors import InvalidArgument
from ..core.features import FeatureSpace
from ..core.memory import F32
from .base import DEFAULT_INIT_STD, EmbeddingStore, normal_init


def mixed_dims(cardinalities, d: int, scale: float, alpha: float = 0.3) -> np.ndarray:
    """``clamp(round(scale * (1/n_f)**alpha), 1, d)`` for every field."""
    card = np.asarray(cardinalities, dtype=np.float64)
    raw = scale * (1.0 / card) ** alpha
    return np.clip(np.rint(raw), 1, d).astype(np.int64)


def mde_bytes(cardinalities, dims, d: int) -> int:
    card = np.asarray(cardinalities, dtype=np.int64)
    dims = np.asarray(dims, dtype=np.int64)
    proj = np.where(dims < d, dims * d, 0)
    return int(np.sum(card * dims + proj)) * F32


class MixedDimTable(EmbeddingStore):
    """Field ``f`` stores ``n_f x d_f`` rows and, when ``d_f < d``, a
    ``d_f x d`` projection applied after lookup."""

    kind = "mde"

    def __init__(self, space: FeatureSpace, d, dims, seed=0, dtype=np.float32,
                 init_std=DEFAULT_INIT_STD, tables=None, projections=None):
        super().__init__(space.n, d, dtype)
        dims = [int(v) for v in dims]
        if len(dims) != space.k or min(dims) < 1 or max(dims) > d:
            raise InvalidArgument(f"need one width in [1, {d}] per field, got {dims}")
        self.space, self.dims = space, dims
        rng = np.random.default_rng(seed)
        if tables is None:
            tables = [normal_init(rng, (nf, df), init_std, self.dtype)
                      for nf, df in zip(space.cardinalities, dims)]
            projections = [None if df == d else normal_init(rng, (df, d), 1.0 / np.sqrt(df), self.dtype)
                           for df in dims]
        self.tables = [np.array(t, dtype=self.dtype) for t in tables]
        self.projections = [None if p is None else np.array(p, dtype=self.dtype) for p in projections]

    def _groups(self, ids):
        fields = self.space.field_of(ids)
        for f in np.unique(fields):
            sel = np.flatnonzero(fields == f)
            yield int(f), sel, ids[sel] - self.space.offsets[f]

    def _lookup(self, ids):
        out = np.empty((ids.size, self.d), dtype=self.dtype)
        for f, sel, local in self._groups(ids):
            rows = self.tables[f][local]
            out[sel] = rows if self.projections[f] is None else rows @ self.projections[f]
        return out

    def parameters(self):
        params = {f"table{f}": t for f, t in enumerate(self.tables)}
        params.update({f"proj{f}": p for f, p in enumerate(self.projections) if p is not None})
        return params

    def _grads(self, ids, grads):
        out = {}
        for f, sel, local in self._groups(ids):
            g, p = grads[sel], self.projections[f]
            if p is None:
                out[f"table{f}"] = (local, g)
            else:
                out[f"table{f}"] = (local, g @ p.T)
                out[f"proj{f}"] = (None, self.tables[f][local].T @ g)
        return out

    def inference_bytes(self):
        return mde_bytes(self.space.cardinalities, self.dims, self.d)

    def _meta(self):
        return {"n": self.n, "d": self.d, "cardinalities": [int(c) for c in self.space.cardinalities],
                "dims": self.dims}

    def _arrays(self):
        arrays = {f"table{f}": t.astype(np.float32) for f, t in enumerate(self.tables)}
        arrays.update({f"proj{f}": p.astype(np.float32) for f, p in enumerate(self.projections) if p is not None})
        return arrays

    @classmethod
    def from_container(cls, c):
        m, a = c.meta, c.arrays
        space = FeatureSpace(tuple(m["cardinalities"]))
        k = len(m["dims"])
        tables = [a[f"table{f}"] for f in range(k)]
        projections = [a.get(f"proj{f}") for f in range(k)]
        return cls(space, m["d"], m["dims"], tables=tables, projections=projections).freeze()
