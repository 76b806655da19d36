"""Codec contract plus the two trivial codecs (identity and integer)."""

from __future__ import annotations

import numpy as np

from ..core.checkpoint import Container
from ..core.errors import InvalidArgument, check_ids
from ..core.memory import F32


class Codec:
    """A frozen, compressed ``n x d`` matrix with batched row decoding.

    ``nbytes`` is the exact payload size and equals the summed size of the
    arrays in ``to_container``.
    """

    kind = "abstract"

    def __init__(self, n: int, d: int):
        self.n, self.d = int(n), int(d)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.d

    def decompress_batch(self, ids) -> np.ndarray:
        ids = check_ids(ids, self.n).ravel()
        return self._decode(ids)

    def decompress(self) -> np.ndarray:
        return self._decode(np.arange(self.n))

    def _decode(self, ids: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _meta(self) -> dict:
        return {"n": self.n, "d": self.d}

    def _arrays(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def nbytes(self) -> int:
        return int(sum(a.nbytes for a in self._arrays().values()))

    def to_container(self) -> Container:
        return Container(self.kind, self._meta(), self._arrays())

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, d={self.d}, bytes={self.nbytes()})"


def as_matrix(matrix) -> np.ndarray:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidArgument(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    return m


class IdentityCodec(Codec):
    """Uncompressed FP32 copy; the reference for recall."""

    kind = "identity"

    def __init__(self, matrix):
        matrix = as_matrix(matrix)
        super().__init__(*matrix.shape)
        self.values = np.array(matrix, dtype=np.float32)

    @classmethod
    def fit(cls, matrix, seed=0):
        return cls(matrix)

    @staticmethod
    def predict_bytes(n, d):
        return n * d * F32

    def _decode(self, ids):
        return self.values[ids]

    def _arrays(self):
        return {"values": self.values}

    @classmethod
    def from_container(cls, c):
        return cls(c.arrays["values"])


class IntCodec(Codec):
    """Round-to-nearest INT8/INT16 with per-row (or one per-table) scale and bias."""

    kind = "int_codec"

    def __init__(self, n, d, bits, codes, scale, bias, granularity="row"):
        super().__init__(n, d)
        self.bits, self.granularity = int(bits), granularity
        self.codes = codes
        self.scale = np.asarray(scale, np.float32).reshape(-1)
        self.bias = np.asarray(bias, np.float32).reshape(-1)

    @classmethod
    def fit(cls, matrix, bits=8, granularity="row", seed=0):
        from ..stores.quant import affine_params, quantize

        matrix = as_matrix(matrix).astype(np.float64)
        n, d = matrix.shape
        if granularity == "row":
            scale, bias = affine_params(matrix, bits)
            codes = quantize(matrix, scale[:, None], bias[:, None], bits)
        elif granularity == "table":
            scale, bias = affine_params(matrix.reshape(1, -1), bits)
            codes = quantize(matrix, scale[0], bias[0], bits)
        else:
            raise InvalidArgument(f"unknown granularity {granularity!r}")
        return cls(n, d, bits, codes, scale, bias, granularity)

    @staticmethod
    def predict_bytes(n, d, bits=8, granularity="row"):
        return n * d * (bits // 8) + (2 * n * F32 if granularity == "row" else 0)

    def _decode(self, ids):
        q = self.codes[ids].astype(np.float32)
        if self.granularity == "table":
            return q * self.scale[0] + self.bias[0]
        return q * self.scale[ids, None] + self.bias[ids, None]

    def _meta(self):
        meta = {"n": self.n, "d": self.d, "bits": self.bits, "granularity": self.granularity}
        if self.granularity == "table":
            # two scalars, kept with the shape rather than in the payload
            meta.update(scale=float(self.scale[0]), bias=float(self.bias[0]))
        return meta

    def _arrays(self):
        if self.granularity == "table":
            return {"codes": self.codes}
        return {"codes": self.codes, "scale": self.scale, "bias": self.bias}

    @classmethod
    def from_container(cls, c):
        m, a = c.meta, c.arrays
        return cls(m["n"], m["d"], m["bits"], a["codes"], a.get("scale", m.get("scale")),
                   a.get("bias", m.get("bias")), m["granularity"])


def norm_groups(matrix, groups: int) -> np.ndarray:
    """Group id per row from its L2-norm rank: ``rank * groups // n``.

    Equal norms are ordered by row index, so group sizes differ by at most
    one and higher groups hold larger norms.
    """
    norms = np.linalg.norm(np.asarray(matrix, dtype=np.float64), axis=1)
    n = norms.size
    rank = np.empty(n, dtype=np.int64)
    rank[np.argsort(norms, kind="stable")] = np.arange(n)
    return (rank * groups // n).astype(np.int64)
