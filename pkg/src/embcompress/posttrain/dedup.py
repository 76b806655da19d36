"""Block deduplication with L2 locality-sensitive hashing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.errors import FeasibilityError, InvalidArgument
from ..core.memory import F32, INDEX
from .base import Codec, as_matrix

DEFAULT_PROJECTIONS = 4


@dataclass(frozen=True)
class LshParams:
    """``L`` seeded Gaussian projections ``a_j`` and shifts ``u_j * w``."""

    width: int
    bucket: float = 1.0
    count: int = DEFAULT_PROJECTIONS
    seed: int = 0
    projections: np.ndarray = field(init=False, repr=False, compare=False)
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.width < 1 or self.count < 1 or not self.bucket > 0:
            raise InvalidArgument("need width >= 1, count >= 1 and a positive bucket width")
        rng = np.random.default_rng(self.seed)
        object.__setattr__(self, "projections", rng.standard_normal((self.count, self.width)))
        object.__setattr__(self, "offsets", rng.random(self.count))

    def with_bucket(self, bucket: float) -> "LshParams":
        return LshParams(self.width, bucket, self.count, self.seed)


def lsh_signature(blocks, params: LshParams) -> np.ndarray:
    """``floor((a_j . v + u_j * w) / w)`` for each block ``v`` (rows of ``blocks``)."""
    blocks = np.asarray(blocks, dtype=np.float64)
    single = blocks.ndim == 1
    blocks = np.atleast_2d(blocks)
    if blocks.shape[1] != params.width:
        raise InvalidArgument(f"block width {blocks.shape[1]} != {params.width}")
    w = params.bucket
    sig = np.floor((blocks @ params.projections.T + params.offsets * w) / w).astype(np.int64)
    return sig[0] if single else sig


def block_view(matrix: np.ndarray, width: int) -> np.ndarray:
    """Row-aligned blocks: a divisor of ``d`` splits rows, a multiple of
    ``d`` joins consecutive rows (the last block zero-padded)."""
    n, d = matrix.shape
    if width <= d:
        if d % width:
            raise InvalidArgument(f"block width {width} must divide d={d} or be a multiple of it")
        return matrix.reshape(n * (d // width), width)
    if width % d:
        raise InvalidArgument(f"block width {width} must divide d={d} or be a multiple of it")
    per = width // d
    rows = -(-n // per) * per
    padded = np.zeros((rows, d), dtype=matrix.dtype)
    padded[:n] = matrix
    return padded.reshape(rows // per, width)


def block_count(n: int, d: int, width: int) -> int:
    return n * (d // width) if width <= d else -(-n // (width // d))


class DedupCodec(Codec):
    """Blocks with identical LSH signatures share one stored representative.

    The representative of a signature class is its lowest-indexed block,
    stored verbatim. ``mapping`` holds a 32-bit representative id per block.
    """

    kind = "dedup"

    def __init__(self, n, d, width, representatives, mapping, bucket=None):
        super().__init__(n, d)
        self.width = int(width)
        self.bucket = bucket
        self.representatives = np.asarray(representatives, dtype=np.float32)
        self.mapping = np.asarray(mapping, dtype=np.int32)

    @classmethod
    def fit(cls, matrix, width=None, bucket=1.0, count=DEFAULT_PROJECTIONS, seed=0, budget=None):
        if budget is not None:
            return cls.fit_budget(matrix, budget, width=width, count=count, seed=seed)
        matrix = as_matrix(matrix)
        n, d = matrix.shape
        width = d if width is None else int(width)
        blocks = block_view(np.asarray(matrix, dtype=np.float32), width)
        sig = np.ascontiguousarray(lsh_signature(blocks, LshParams(width, bucket, count, seed)))
        _, first, inverse = np.unique(sig.view(f"V{8 * count}").ravel(), return_index=True, return_inverse=True)
        inverse = inverse.ravel()
        # renumber classes by first occurrence so the layout is order-stable
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        return cls(n, d, width, blocks[first[order]], rank[inverse], bucket=float(bucket))

    @classmethod
    def fit_budget(cls, matrix, budget, width=None, count=DEFAULT_PROJECTIONS, seed=0, steps=40):
        """Smallest bucket width (log-scale bisection) whose payload fits ``budget``."""
        matrix = np.asarray(as_matrix(matrix), dtype=np.float32)
        n, d = matrix.shape
        width = d if width is None else int(width)
        nb = block_count(n, d, width)
        max_unique = (int(budget) - nb * INDEX) // (width * F32)
        if max_unique < 1:
            raise FeasibilityError(f"dedup with block width {width} needs at least "
                                   f"{cls.predict_bytes(n, d, width, 1)} bytes",
                                   nearest_bytes=cls.predict_bytes(n, d, width, 1))
        params = LshParams(width, 1.0, count, seed)
        proj = block_view(matrix, width).astype(np.float64) @ params.projections.T

        def classes(bucket):
            sig = np.floor((proj + params.offsets * bucket) / bucket).astype(np.int64)
            return np.unique(np.ascontiguousarray(sig).view(f"V{8 * count}").ravel()).size

        scale = max(float(np.abs(proj).max()), 1e-30)
        lo, hi = np.log(scale * 1e-9), np.log(scale * 4.0)
        if classes(np.exp(lo)) <= max_unique:
            hi = lo
        # a wide enough bucket sends every block to one class
        while classes(np.exp(hi)) > max_unique:
            lo, hi = hi, hi + np.log(16.0)
        for _ in range(steps):
            if hi - lo < 1e-9:
                break
            mid = 0.5 * (lo + hi)
            if classes(np.exp(mid)) <= max_unique:
                hi = mid
            else:
                lo = mid
        return cls.fit(matrix, width=width, bucket=float(np.exp(hi)), count=count, seed=seed)

    @staticmethod
    def predict_bytes(n, d, width, unique):
        return int(unique) * width * F32 + block_count(n, d, width) * INDEX

    @property
    def unique(self) -> int:
        return self.representatives.shape[0]

    def _decode(self, ids):
        if self.width <= self.d:
            per = self.d // self.width
            blocks = self.mapping[(ids[:, None] * per + np.arange(per)).ravel()]
            return self.representatives[blocks].reshape(ids.size, self.d)
        per = self.width // self.d
        block, offset = np.divmod(ids, per)
        reps = self.representatives[self.mapping[block]].reshape(ids.size, per, self.d)
        return reps[np.arange(ids.size), offset]

    def _meta(self):
        return {"n": self.n, "d": self.d, "width": self.width, "bucket": self.bucket}

    def _arrays(self):
        return {"representatives": self.representatives, "mapping": self.mapping}

    @classmethod
    def from_container(cls, c):
        m = c.meta
        return cls(m["n"], m["d"], m["width"], c.arrays["representatives"], c.arrays["mapping"], m.get("bucket"))
