"""Tensor-train SVD and the four-mode TT codec."""

from __future__ import annotations

import math

import numpy as np

from ..core.errors import InvalidArgument
from ..core.memory import F32
from .base import Codec, as_matrix


def _caps(max_rank, count):
    if max_rank is None:
        return [None] * count
    if np.isscalar(max_rank):
        return [int(max_rank)] * count
    if len(max_rank) != count:
        raise InvalidArgument(f"need {count} rank caps, got {len(max_rank)}")
    return [int(r) for r in max_rank]


def tt_ranks(dims, max_rank=None) -> list[int]:
    """Ranks the sequential truncated SVDs will produce for ``dims``."""
    ranks, r = [], 1
    caps = _caps(max_rank, len(dims) - 1)
    for k in range(len(dims) - 1):
        rows = r * dims[k]
        cols = math.prod(dims[k + 1:])
        r = min(rows, cols) if caps[k] is None else min(rows, cols, caps[k])
        ranks.append(r)
    return ranks


def tt_svd(tensor: np.ndarray, max_rank=None) -> list[np.ndarray]:
    """Left-to-right TT decomposition by truncated SVDs.

    Returns cores of shape ``(R_{k-1}, I_k, R_k)`` with ``R_0 = R_t = 1``.
    Ranks are ``min(unfolding rows, unfolding cols, cap)`` so they depend on
    shapes only, never on the data; with no cap the result is exact.
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    dims = list(tensor.shape)
    ranks = tt_ranks(dims, max_rank)
    cores = []
    rest = tensor.reshape(dims[0], -1)
    r_prev = 1
    for k, r in enumerate(ranks):
        u, s, vt = np.linalg.svd(rest, full_matrices=False)
        cores.append(u[:, :r].reshape(r_prev, dims[k], r))
        rest = (s[:r, None] * vt[:r]).reshape(r * dims[k + 1], -1)
        r_prev = r
    cores.append(rest.reshape(r_prev, dims[-1], 1))
    return cores


def tt_full(cores) -> np.ndarray:
    out = cores[0]
    for c in cores[1:]:
        out = np.tensordot(out, c, axes=(out.ndim - 1, 0))
    return out.reshape(out.shape[1:-1])


def balanced_factors(value: int) -> tuple[int, int]:
    """``(a, b)`` with ``a * b >= value`` and ``a, b`` as close as possible."""
    a = max(1, math.isqrt(value - 1) + 1) if value > 1 else 1
    return a, max(1, -(-value // a))


def exact_factors(value: int) -> tuple[int, int]:
    """Divisor pair of ``value`` closest to its square root."""
    a = math.isqrt(value)
    while value % a:
        a -= 1
    return a, value // a


class TtCodec(Codec):
    """The matrix padded to ``n1 * n2`` rows and viewed as an
    ``(n1, n2, d1, d2)`` tensor, then split into four TT cores.

    A row decodes as a length-``R2`` coefficient vector from the first two
    cores times an ``R2 x d`` matrix built from the last two.
    """

    kind = "tt"

    def __init__(self, n, d, cores):
        super().__init__(n, d)
        self.cores = [np.asarray(c, dtype=np.float32) for c in cores]
        self.n1, self.n2 = self.cores[0].shape[1], self.cores[1].shape[1]

    @property
    def ranks(self) -> list[int]:
        return [c.shape[2] for c in self.cores[:-1]]

    @staticmethod
    def modes(n, d) -> list[int]:
        return [*balanced_factors(n), *exact_factors(d)]

    @classmethod
    def fit(cls, matrix, max_rank=None, seed=0):
        matrix = as_matrix(matrix).astype(np.float64)
        n, d = matrix.shape
        dims = cls.modes(n, d)
        padded = np.zeros((dims[0] * dims[1], d))
        padded[:n] = matrix
        cores = tt_svd(padded.reshape(dims), max_rank)
        return cls(n, d, cores)

    @classmethod
    def predict_bytes(cls, n, d, max_rank=None):
        dims = cls.modes(n, d)
        full = [1] + tt_ranks(dims, max_rank) + [1]
        return sum(full[k] * dims[k] * full[k + 1] for k in range(4)) * F32

    def _right(self):
        r2 = self.cores[2].shape[0]
        return np.tensordot(self.cores[2], self.cores[3], axes=(2, 0)).reshape(r2, self.d)

    def _decode(self, ids):
        i1, i2 = np.divmod(ids, self.n2)
        a = self.cores[0][0, i1]
        b = np.einsum("br,brs->bs", a, self.cores[1][:, i2].transpose(1, 0, 2))
        return b @ self._right()

    def _meta(self):
        return {"n": self.n, "d": self.d}

    def _arrays(self):
        return {f"core{k}": c for k, c in enumerate(self.cores)}

    @classmethod
    def from_container(cls, c):
        return cls(c.meta["n"], c.meta["d"], [c.arrays[f"core{k}"] for k in range(4)])
