"""Tensor-train embedding table (TT-Rec)."""

from __future__ import annotations

import math

import numpy as np

from ..core.errors import InvalidArgument
from ..core.memory import F32
from .base import DEFAULT_INIT_STD, EmbeddingStore


class TtRecTable(EmbeddingStore):
    """Embedding table factorized into ``t`` tensor-train cores.

    Core ``k`` is stored as ``(m_k, R_{k-1}, d_k, R_k)`` so a feature's slice
    is a row gather. Row ``x`` is the chained product of the slices picked
    by the row-major mixed-radix digits of ``x`` over ``row_factors``,
    flattened row-major over ``col_factors``.
    """

    kind = "tt_rec"

    def __init__(self, n, d, row_factors, col_factors, ranks, seed=0, dtype=np.float32,
                 init_std=DEFAULT_INIT_STD, cores=None):
        super().__init__(n, d, dtype)
        row_factors = [int(v) for v in row_factors]
        col_factors = [int(v) for v in col_factors]
        ranks = [int(r) for r in ranks]
        t = len(row_factors)
        if t < 2 or len(col_factors) != t or len(ranks) != t - 1:
            raise InvalidArgument("need t >= 2 row factors, t column factors and t-1 ranks")
        if math.prod(row_factors) < n:
            raise InvalidArgument(f"row factors {row_factors} cover fewer than n={n} rows")
        if math.prod(col_factors) != d:
            raise InvalidArgument(f"column factors {col_factors} do not multiply to d={d}")
        if min(ranks) < 1:
            raise InvalidArgument("ranks must be >= 1")
        self.row_factors, self.col_factors, self.ranks = row_factors, col_factors, ranks
        full = [1] + ranks + [1]
        shapes = [(row_factors[k], full[k], col_factors[k], full[k + 1]) for k in range(t)]
        if cores is None:
            rng = np.random.default_rng(seed)
            # product entries then have variance init_std**2
            std = (init_std**2 / math.prod(ranks)) ** (1.0 / (2 * t))
            cores = [rng.standard_normal(s) * std for s in shapes]
        self.cores = [np.array(c, dtype=self.dtype) for c in cores]
        for c, s in zip(self.cores, shapes):
            if c.shape != s:
                raise InvalidArgument(f"core shape {c.shape} != {s}")

    @property
    def t(self) -> int:
        return len(self.cores)

    def digits(self, ids):
        return np.unravel_index(np.asarray(ids, dtype=np.int64), self.row_factors)

    def _slices(self, ids):
        return [core[i] for core, i in zip(self.cores, self.digits(ids))]

    def _lookup(self, ids):
        b = ids.size
        sl = self._slices(ids)
        left = sl[0].reshape(b, self.col_factors[0], -1)
        for c in sl[1:]:
            left = np.einsum("bDr,brEs->bDEs", left, c).reshape(b, -1, c.shape[-1])
        return left.reshape(b, self.d)

    def parameters(self):
        return {f"core{k}": c for k, c in enumerate(self.cores)}

    def _grads(self, ids, grads):
        b, t = ids.size, self.t
        digits = self.digits(ids)
        sl = [core[i] for core, i in zip(self.cores, digits)]
        prefix = [np.ones((b, 1, 1), dtype=self.dtype)]
        for c in sl[:-1]:
            prefix.append(np.einsum("bDr,brEs->bDEs", prefix[-1], c).reshape(b, -1, c.shape[-1]))
        suffix = [None] * t
        suffix[-1] = np.ones((b, 1, 1), dtype=self.dtype)
        for k in range(t - 2, -1, -1):
            c = sl[k + 1]
            suffix[k] = np.einsum("brEs,bsF->brEF", c, suffix[k + 1]).reshape(b, c.shape[1], -1)
        out = {}
        for k in range(t):
            g = grads.reshape(b, prefix[k].shape[1], self.col_factors[k], suffix[k].shape[2])
            out[f"core{k}"] = (digits[k], np.einsum("bDr,bDEF,bsF->brEs", prefix[k], g, suffix[k], optimize=True))
        return out

    def inference_bytes(self):
        return sum(c.size for c in self.cores) * F32

    def _meta(self):
        return {"n": self.n, "d": self.d, "row_factors": self.row_factors,
                "col_factors": self.col_factors, "ranks": self.ranks}

    def _arrays(self):
        return {f"core{k}": c.astype(np.float32) for k, c in enumerate(self.cores)}

    @classmethod
    def from_container(cls, c):
        m = c.meta
        cores = [c.arrays[f"core{k}"] for k in range(len(m["row_factors"]))]
        return cls(m["n"], m["d"], m["row_factors"], m["col_factors"], m["ranks"], cores=cores).freeze()

    @classmethod
    def from_matrix(cls, matrix, row_factors, col_factors, max_rank=None, dtype=np.float64):
        """Exact (or rank-capped) TT-SVD of a dense ``n x d`` matrix."""
        from ..posttrain.tt import tt_svd

        matrix = np.asarray(matrix, dtype=np.float64)
        n, d = matrix.shape
        t = len(row_factors)
        padded = np.zeros((math.prod(row_factors), d))
        padded[:n] = matrix
        tensor = padded.reshape(*row_factors, *col_factors)
        perm = [ax for k in range(t) for ax in (k, t + k)]
        tensor = tensor.transpose(perm).reshape([row_factors[k] * col_factors[k] for k in range(t)])
        cores = tt_svd(tensor, max_rank=max_rank)
        ranks = [c.shape[2] for c in cores[:-1]]
        shaped = []
        for k, c in enumerate(cores):
            r0, _, r1 = c.shape
            c = c.reshape(r0, row_factors[k], col_factors[k], r1).transpose(1, 0, 2, 3)
            shaped.append(c)
        return cls(n, d, row_factors, col_factors, ranks, cores=shaped, dtype=dtype)
