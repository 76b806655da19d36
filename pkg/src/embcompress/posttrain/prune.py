"""Magnitude-threshold pruning into an adaptive sparse payload."""

from __future__ import annotations

import numpy as np

from ..core.errors import FeasibilityError
from ..core.memory import max_sparse_nnz
from ..core.sparse import SparseRows
from .base import Codec, as_matrix


def count_above(mags: np.ndarray, tau: float) -> int:
    return int(np.count_nonzero(mags > tau))


def find_threshold(mags: np.ndarray, keep: int) -> np.float32:
    """Smallest float32 ``tau >= 0`` with at most ``keep`` magnitudes above it.

    Bisection runs over the float32 bit patterns, which order like the
    non-negative values they encode, so it finishes in at most 32 steps.
    """
    mags = np.asarray(mags, dtype=np.float32)
    lo, hi = 0, int(np.max(mags, initial=0).view(np.uint32))
    if count_above(mags, np.float32(0)) <= keep:
        return np.float32(0)
    # invariant: count_above(lo) > keep >= count_above(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if count_above(mags, np.uint32(mid).view(np.float32)) <= keep:
            hi = mid
        else:
            lo = mid
    return np.uint32(hi).view(np.float32)


class ThresholdPruneCodec(Codec):
    """Keeps entries with ``|v| > tau`` plus, to fill the budget exactly,
    entries with ``|v| == tau`` in (row, col) order. Zeros are never stored."""

    kind = "threshold_prune"

    def __init__(self, n, d, sparse: SparseRows, tau: float):
        super().__init__(n, d)
        self.sparse = sparse
        self.tau = float(tau)

    @classmethod
    def fit(cls, matrix, budget=None, nnz=None, seed=0):
        matrix = np.asarray(as_matrix(matrix), dtype=np.float32)
        n, d = matrix.shape
        if nnz is None:
            _, nnz = max_sparse_nnz(n, d, budget)
            if nnz < 0:
                raise FeasibilityError(f"budget {budget} is negative", nearest_bytes=0)
        mags = np.abs(matrix)
        tau = find_threshold(mags, nnz)
        keep = mags > tau
        room = nnz - int(np.count_nonzero(keep))
        if room > 0 and tau > 0:
            ties = np.flatnonzero((mags == tau).ravel())[:room]
            keep.ravel()[ties] = True
        return cls(n, d, SparseRows.from_dense(matrix, keep), tau)

    def _decode(self, ids):
        return self.sparse.gather(ids)

    def nbytes(self):
        return self.sparse.nbytes()

    def _meta(self):
        return {"n": self.n, "d": self.d, "format": self.sparse.fmt, "tau": self.tau}

    def _arrays(self):
        return self.sparse.arrays()

    @classmethod
    def from_container(cls, c):
        m = c.meta
        return cls(m["n"], m["d"], SparseRows.from_arrays(m["format"], (m["n"], m["d"]), c.arrays), m["tau"])
