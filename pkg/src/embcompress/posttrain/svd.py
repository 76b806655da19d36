"""Truncated SVD codecs, global and per norm group."""

from __future__ import annotations

import numpy as np

from ..core.errors import InvalidArgument
from ..core.memory import F32
from .base import Codec, as_matrix, norm_groups


def truncated_svd(matrix: np.ndarray, rank: int):
    """``(U * S)[:, :rank]`` and ``Vt[:rank]``, with the full spectrum."""
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    return u[:, :rank] * s[:rank], vt[:rank], s


class SvdCodec(Codec):
    """Rank-``r`` factorization ``left @ right``."""

    kind = "svd"

    def __init__(self, n, d, left, right, spectrum=None):
        super().__init__(n, d)
        self.left = np.asarray(left, dtype=np.float32)
        self.right = np.asarray(right, dtype=np.float32)
        self.spectrum = spectrum

    @property
    def rank(self) -> int:
        return self.right.shape[0]

    @classmethod
    def fit(cls, matrix, rank, seed=0):
        matrix = as_matrix(matrix).astype(np.float64)
        n, d = matrix.shape
        if not 1 <= rank <= min(n, d):
            raise InvalidArgument(f"rank {rank} outside [1, {min(n, d)}]")
        left, right, s = truncated_svd(matrix, rank)
        return cls(n, d, left, right, spectrum=s)

    @staticmethod
    def predict_bytes(n, d, rank):
        return (n + d) * rank * F32

    def discarded_energy(self) -> float:
        return float(np.sum(self.spectrum[self.rank:] ** 2))

    def _decode(self, ids):
        return self.left[ids] @ self.right

    def _arrays(self):
        return {"left": self.left, "right": self.right}

    @classmethod
    def from_container(cls, c):
        return cls(c.meta["n"], c.meta["d"], c.arrays["left"], c.arrays["right"])


def group_ranks(scale: float, groups: int, sizes, d: int) -> list[int]:
    """Ranks proportional to ``2**g``, capped by each group's shape."""
    return [int(min(np.floor(scale * 2.0**g), sizes[g], d)) for g in range(groups)]


class MagSvdCodec(Codec):
    """Separate truncated SVD per norm-rank group (larger norms, larger rank).

    Stores a u8 group id per row plus each group's factors; a group with
    rank 0 decodes to zeros.
    """

    kind = "magsvd"

    def __init__(self, n, d, group_ids, lefts, rights):
        super().__init__(n, d)
        self.group_ids = np.asarray(group_ids, dtype=np.uint8)
        self.lefts = [np.asarray(a, dtype=np.float32) for a in lefts]
        self.rights = [np.asarray(a, dtype=np.float32) for a in rights]
        # position of each row inside its group, derived rather than stored
        self.position = np.zeros(n, dtype=np.int64)
        for g in range(len(self.lefts)):
            rows = np.flatnonzero(self.group_ids == g)
            self.position[rows] = np.arange(rows.size)

    @property
    def ranks(self) -> list[int]:
        return [r.shape[0] for r in self.rights]

    @classmethod
    def fit(cls, matrix, ranks, seed=0):
        matrix = as_matrix(matrix).astype(np.float64)
        n, d = matrix.shape
        groups = len(ranks)
        if not 1 <= groups <= 255:
            raise InvalidArgument("need between 1 and 255 groups")
        gid = norm_groups(matrix, groups)
        lefts, rights = [], []
        for g, r in enumerate(ranks):
            rows = matrix[gid == g]
            r = int(min(r, *rows.shape)) if rows.size else 0
            if r > 0:
                left, right, _ = truncated_svd(rows, r)
            else:
                left, right = np.zeros((rows.shape[0], 0)), np.zeros((0, d))
            lefts.append(left)
            rights.append(right)
        return cls(n, d, gid, lefts, rights)

    @staticmethod
    def predict_bytes(n, d, sizes, ranks):
        return n + sum((int(s) + d) * int(r) for s, r in zip(sizes, ranks)) * F32

    def _decode(self, ids):
        out = np.zeros((ids.size, self.d), dtype=np.float32)
        gid = self.group_ids[ids]
        for g, (left, right) in enumerate(zip(self.lefts, self.rights)):
            sel = np.flatnonzero(gid == g)
            if sel.size and right.shape[0]:
                out[sel] = left[self.position[ids[sel]]] @ right
        return out

    def _meta(self):
        return {"n": self.n, "d": self.d, "groups": len(self.lefts)}

    def _arrays(self):
        arrays = {"group_ids": self.group_ids}
        for g, (left, right) in enumerate(zip(self.lefts, self.rights)):
            arrays[f"left{g}"], arrays[f"right{g}"] = left, right
        return arrays

    @classmethod
    def from_container(cls, c):
        g = c.meta["groups"]
        return cls(c.meta["n"], c.meta["d"], c.arrays["group_ids"],
                   [c.arrays[f"left{i}"] for i in range(g)], [c.arrays[f"right{i}"] for i in range(g)])
