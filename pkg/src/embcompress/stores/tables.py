"""Full table and the index-hashing stores (DoubleHash, CompoEmb, MEmCom, ROBE)."""

from __future__ import annotations

import numpy as np

from ..core.errors import InvalidArgument
from ..core.hashing import HashFamily
from ..core.memory import F32
from .base import DEFAULT_INIT_STD, EmbeddingStore, normal_init


class FullTable(EmbeddingStore):
    """Uncompressed ``n x d`` table; the baseline."""

    kind = "full"

    def __init__(self, n, d, seed=0, dtype=np.float32, init_std=DEFAULT_INIT_STD, weight=None):
        super().__init__(n, d, dtype)
        if weight is None:
            weight = normal_init(np.random.default_rng(seed), (n, d), init_std, self.dtype)
        self.weight = np.array(weight, dtype=self.dtype)
        if self.weight.shape != (n, d):
            raise InvalidArgument(f"weight shape {self.weight.shape} != ({n}, {d})")

    def _lookup(self, ids):
        return self.weight[ids]

    def parameters(self):
        return {"weight": self.weight}

    def _grads(self, ids, grads):
        return {"weight": (ids, grads)}

    def inference_bytes(self):
        return self.n * self.d * F32

    def _arrays(self):
        return {"weight": self.weight.astype(np.float32)}

    @classmethod
    def from_container(cls, c):
        s = cls(c.meta["n"], c.meta["d"], weight=c.arrays["weight"])
        return s.freeze()


class DoubleHashTable(EmbeddingStore):
    """Two hash functions into one shared ``m x d`` table; sub-rows are summed."""

    kind = "double_hash"

    def __init__(self, n, d, m, seed=0, dtype=np.float32, init_std=DEFAULT_INIT_STD, table=None):
        super().__init__(n, d, dtype)
        if m < 1:
            raise InvalidArgument("m must be >= 1")
        self.m = int(m)
        self.seed = int(seed)
        self.hashes = HashFamily(seed, 2)
        if table is None:
            # two summed rows: halve the variance of each
            table = normal_init(np.random.default_rng(seed + 1), (m, d), init_std / np.sqrt(2), self.dtype)
        self.table = np.array(table, dtype=self.dtype)

    def buckets(self, ids):
        return self.hashes(ids, 0, self.m), self.hashes(ids, 1, self.m)

    def _lookup(self, ids):
        h1, h2 = self.buckets(ids)
        return self.table[h1] + self.table[h2]

    def parameters(self):
        return {"table": self.table}

    def _grads(self, ids, grads):
        h1, h2 = self.buckets(ids)
        return {"table": (np.concatenate([h1, h2]), np.concatenate([grads, grads]))}

    def inference_bytes(self):
        return self.m * self.d * F32

    def _meta(self):
        return {"n": self.n, "d": self.d, "m": self.m, "seed": self.seed}

    def _arrays(self):
        return {"table": self.table.astype(np.float32)}

    @classmethod
    def from_container(cls, c):
        meta = c.meta
        return cls(meta["n"], meta["d"], meta["m"], seed=meta["seed"], table=c.arrays["table"]).freeze()


class CompoTable(EmbeddingStore):
    """Quotient-remainder compositional embedding with elementwise product.

    Feature ``x`` reads row ``x mod m1`` of the remainder table and row
    ``(x div m1) mod m2`` of the quotient table. The pair is unique per
    feature whenever ``m1 * m2 >= n``.
    """

    kind = "compo"

    def __init__(self, n, d, m1, m2, seed=0, dtype=np.float32, init_std=DEFAULT_INIT_STD,
                 remainder=None, quotient=None):
        super().__init__(n, d, dtype)
        if m1 < 1 or m2 < 1:
            raise InvalidArgument("table sizes must be >= 1")
        self.m1, self.m2 = int(m1), int(m2)
        rng = np.random.default_rng(seed)
        if remainder is None:
            remainder = normal_init(rng, (m1, d), init_std, self.dtype)
        if quotient is None:
            # centred on one so the product starts close to the remainder row
            quotient = 1.0 + normal_init(rng, (m2, d), init_std, self.dtype)
        self.remainder = np.array(remainder, dtype=self.dtype)
        self.quotient = np.array(quotient, dtype=self.dtype)

    @property
    def injective(self) -> bool:
        return self.m1 * self.m2 >= self.n

    def index_pairs(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        return ids % self.m1, (ids // self.m1) % self.m2

    def _lookup(self, ids):
        i, j = self.index_pairs(ids)
        return self.remainder[i] * self.quotient[j]

    def parameters(self):
        return {"remainder": self.remainder, "quotient": self.quotient}

    def _grads(self, ids, grads):
        i, j = self.index_pairs(ids)
        return {
            "remainder": (i, grads * self.quotient[j]),
            "quotient": (j, grads * self.remainder[i]),
        }

    def inference_bytes(self):
        return (self.m1 + self.m2) * self.d * F32

    def _meta(self):
        return {"n": self.n, "d": self.d, "m1": self.m1, "m2": self.m2}

    def _arrays(self):
        return {"remainder": self.remainder.astype(np.float32), "quotient": self.quotient.astype(np.float32)}

    @classmethod
    def from_container(cls, c):
        m = c.meta
        return cls(m["n"], m["d"], m["m1"], m["m2"], remainder=c.arrays["remainder"],
                   quotient=c.arrays["quotient"]).freeze()


class MEmComTable(EmbeddingStore):
    """Hashed shared table plus a per-feature scale and bias.

    ``e(x) = table[h(x)] * scale[x] + bias[x]``
    """

    kind = "memcom"

    def __init__(self, n, d, m, seed=0, dtype=np.float32, init_std=DEFAULT_INIT_STD,
                 table=None, scale=None, bias=None):
        super().__init__(n, d, dtype)
        self.m = int(m)
        self.seed = int(seed)
        self.hashes = HashFamily(seed, 1)
        if table is None:
            table = normal_init(np.random.default_rng(seed + 1), (m, d), init_std, self.dtype)
        self.table = np.array(table, dtype=self.dtype)
        self.scale = np.ones(n, dtype=self.dtype) if scale is None else np.array(scale, dtype=self.dtype)
        self.bias = np.zeros(n, dtype=self.dtype) if bias is None else np.array(bias, dtype=self.dtype)

    def _lookup(self, ids):
        h = self.hashes(ids, 0, self.m)
        return self.table[h] * self.scale[ids, None] + self.bias[ids, None]

    def parameters(self):
        return {"table": self.table, "scale": self.scale, "bias": self.bias}

    def _grads(self, ids, grads):
        h = self.hashes(ids, 0, self.m)
        rows = self.table[h]
        return {
            "table": (h, grads * self.scale[ids, None]),
            "scale": (ids, np.sum(grads * rows, axis=1)),
            "bias": (ids, np.sum(grads, axis=1)),
        }

    def inference_bytes(self):
        return self.m * self.d * F32 + 2 * self.n * F32

    def _meta(self):
        return {"n": self.n, "d": self.d, "m": self.m, "seed": self.seed}

    def _arrays(self):
        return {
            "table": self.table.astype(np.float32),
            "scale": self.scale.astype(np.float32),
            "bias": self.bias.astype(np.float32),
        }

    @classmethod
    def from_container(cls, c):
        m, a = c.meta, c.arrays
        return cls(m["n"], m["d"], m["m"], seed=m["seed"], table=a["table"], scale=a["scale"],
                   bias=a["bias"]).freeze()


class RobeArray(EmbeddingStore):
    """Random offset block embedding over a single circular 1-D array.

    The embedding of ``x`` is the concatenation of ``d / chunk`` slices of
    length ``chunk``, each starting at a hashed offset and wrapping modulo
    the array size ``Z``.
    """

    kind = "robe"

    def __init__(self, n, d, size, chunk=4, seed=0, dtype=np.float32, init_std=DEFAULT_INIT_STD, array=None):
        super().__init__(n, d, dtype)
        if chunk < 1 or d % chunk:
            raise InvalidArgument(f"chunk size {chunk} must divide d={d}")
        if size < 1:
            raise InvalidArgument("array size must be >= 1")
        self.size = int(size)
        self.chunk = int(chunk)
        self.seed = int(seed)
        self.hashes = HashFamily(seed, 1)
        if array is None:
            array = normal_init(np.random.default_rng(seed + 1), (size,), init_std, self.dtype)
        self.array = np.array(array, dtype=self.dtype)

    def positions(self, ids) -> np.ndarray:
        """``(len(ids), d)`` array positions read for each feature."""
        ids = np.asarray(ids, dtype=np.int64)
        nchunks = self.d // self.chunk
        keys = ids[:, None] * nchunks + np.arange(nchunks)
        offsets = self.hashes(keys, 0, self.size)
        pos = offsets[:, :, None] + np.arange(self.chunk)
        return (pos % self.size).reshape(ids.size, self.d)

    def _lookup(self, ids):
        return self.array[self.positions(ids)]

    def parameters(self):
        return {"array": self.array}

    def _grads(self, ids, grads):
        return {"array": (self.positions(ids).ravel(), grads.ravel())}

    def inference_bytes(self):
        return self.size * F32

    def _meta(self):
        return {"n": self.n, "d": self.d, "size": self.size, "chunk": self.chunk, "seed": self.seed}

    def _arrays(self):
        return {"array": self.array.astype(np.float32)}

    @classmethod
    def from_container(cls, c):
        m = c.meta
        return cls(m["n"], m["d"], m["size"], chunk=m["chunk"], seed=m["seed"], array=c.arrays["array"]).freeze()
