"""Product quantization and its magnitude-grouped variant."""

from __future__ import annotations

import numpy as np

from ..core.errors import InvalidArgument
from ..core.memory import F32, code_dtype, index_width
from .base import Codec, as_matrix, norm_groups
from .kmeans import kmeans


def _check_parts(d, parts):
    if parts < 1 or d % parts:
        raise InvalidArgument(f"part count {parts} must divide d={d}")


class PqCodec(Codec):
    """Rows split into ``parts`` equal sub-vectors, each replaced by one of
    ``K`` per-part centroids. Codebooks are ``(parts, K, d/parts)``; codes
    are ``(n, parts)`` in the narrowest unsigned type holding ``K``."""

    kind = "pq"

    def __init__(self, n, d, codebooks, codes):
        super().__init__(n, d)
        self.codebooks = np.asarray(codebooks, dtype=np.float32)
        self.codes = np.asarray(codes)
        self.parts, self.K = self.codebooks.shape[:2]

    @classmethod
    def fit(cls, matrix, parts=4, K=256, seed=0):
        matrix = as_matrix(matrix).astype(np.float64)
        n, d = matrix.shape
        _check_parts(d, parts)
        if K < 1:
            raise InvalidArgument("K must be >= 1")
        w = d // parts
        books = np.zeros((parts, K, w))
        codes = np.zeros((n, parts), dtype=code_dtype(K))
        for p in range(parts):
            cent, labels, _ = kmeans(matrix[:, p * w:(p + 1) * w], K, seed=seed + p)
            books[p], codes[:, p] = cent, labels
        return cls(n, d, books, codes)

    @staticmethod
    def predict_bytes(n, d, parts, K):
        return n * parts * index_width(K) + K * d * F32

    def _decode(self, ids):
        codes = self.codes[ids].astype(np.int64)
        parts = [self.codebooks[p][codes[:, p]] for p in range(self.parts)]
        return np.concatenate(parts, axis=1)

    def _arrays(self):
        return {"codebooks": self.codebooks, "codes": self.codes}

    @classmethod
    def from_container(cls, c):
        return cls(c.meta["n"], c.meta["d"], c.arrays["codebooks"], c.arrays["codes"])


def group_sizes(base_k: int, groups: int) -> list[int]:
    """Centroids per group, doubling from the smallest-norm group."""
    return [int(base_k) << g for g in range(groups)]


class MagPqCodec(PqCodec):
    """PQ with more centroids for larger-norm rows.

    Rows are split into ``groups`` norm-rank groups; group ``g`` is clustered
    with ``base_k * 2**g`` centroids per part. All groups' centroids share
    one concatenated codebook per part, so a code also identifies its group
    and no per-row group id is stored.
    """

    kind = "magpq"

    def __init__(self, n, d, codebooks, codes, sizes):
        super().__init__(n, d, codebooks, codes)
        self.sizes = [int(s) for s in sizes]
        self.groups = None

    @classmethod
    def fit(cls, matrix, parts=4, base_k=16, groups=4, seed=0):
        matrix = as_matrix(matrix).astype(np.float64)
        n, d = matrix.shape
        _check_parts(d, parts)
        sizes = group_sizes(base_k, groups)
        total = sum(sizes)
        w = d // parts
        gid = norm_groups(matrix, groups)
        books = np.zeros((parts, total, w))
        codes = np.zeros((n, parts), dtype=code_dtype(total))
        start = 0
        for g, k in enumerate(sizes):
            rows = np.flatnonzero(gid == g)
            if rows.size:
                for p in range(parts):
                    cent, labels, _ = kmeans(matrix[rows, p * w:(p + 1) * w], k, seed=seed + 131 * g + p)
                    books[p, start:start + k] = cent
                    codes[rows, p] = start + labels
            start += k
        codec = cls(n, d, books, codes, sizes)
        codec.groups = gid
        return codec

    @staticmethod
    def predict_bytes(n, d, parts, base_k, groups=4):
        return PqCodec.predict_bytes(n, d, parts, sum(group_sizes(base_k, groups)))

    def group_of(self, ids) -> np.ndarray:
        """Group of each row, recovered from its first code."""
        bounds = np.cumsum(self.sizes)
        return np.searchsorted(bounds, self.codes[ids, 0].astype(np.int64), side="right")

    def _meta(self):
        return {"n": self.n, "d": self.d, "sizes": self.sizes}

    @classmethod
    def from_container(cls, c):
        return cls(c.meta["n"], c.meta["d"], c.arrays["codebooks"], c.arrays["codes"], c.meta["sizes"])
