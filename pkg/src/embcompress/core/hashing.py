"""Seeded universal hashing over the Mersenne prime 2**61 - 1.

``h_i(x) = ((a_i * x + b_i) mod p) mod m`` with ``(a_i, b_i)`` drawn from a
PCG64 stream, so bucket assignments are reproducible on every platform.
The 122-bit product is reduced with 30/31-bit limbs so that every
intermediate fits in ``uint64``.
"""

from __future__ import annotations

import numpy as np

MERSENNE_61 = (1 << 61) - 1

_P = np.uint64(MERSENNE_61)
_M31 = np.uint64((1 << 31) - 1)
_M30 = np.uint64((1 << 30) - 1)
_S61 = np.uint64(61)
_S31 = np.uint64(31)
_S30 = np.uint64(30)


def _reduce(s: np.ndarray) -> np.ndarray:
    s = (s & _P) + (s >> _S61)
    s = (s & _P) + (s >> _S61)
    return np.where(s >= _P, s - _P, s)


def mulmod61(a: int, x: np.ndarray) -> np.ndarray:
    """``(a * x) mod (2**61 - 1)`` for ``a, x < 2**61`` elementwise."""
    a = int(a)
    a1, a0 = np.uint64(a >> 31), np.uint64(a & ((1 << 31) - 1))
    x1 = x >> _S31
    x0 = x & _M31
    hi = np.uint64(2) * (a1 * x1)
    mid = a1 * x0 + a0 * x1
    s = hi + (mid >> _S30) + ((mid & _M30) << _S31) + a0 * x0
    return _reduce(s)


class HashFamily:
    """A fixed family of multiply-add hash functions derived from ``seed``."""

    def __init__(self, seed: int, count: int = 4):
        if count < 1:
            raise ValueError("count must be positive")
        self.seed = int(seed)
        rng = np.random.Generator(np.random.PCG64(self.seed))
        self.a = [int(v) for v in rng.integers(1, MERSENNE_61, size=count, dtype=np.uint64)]
        self.b = [int(v) for v in rng.integers(0, MERSENNE_61, size=count, dtype=np.uint64)]

    def __len__(self) -> int:
        return len(self.a)

    def __call__(self, index, which: int, m: int) -> np.ndarray:
        return self.hash(index, which, m)

    def hash(self, index, which: int, m: int) -> np.ndarray:
        """Bucket in ``[0, m)`` for every entry of ``index`` under hash ``which``."""
        if m < 1:
            raise ValueError(f"bucket count must be >= 1, got {m}")
        if not 0 <= which < len(self.a):
            raise ValueError(f"hash id {which} outside family of {len(self.a)}")
        x = np.asarray(index)
        if x.dtype.kind == "u":
            x = x.astype(np.uint64)
        else:
            x = np.ascontiguousarray(x, dtype=np.int64).view(np.uint64)
        x = _reduce(x)
        s = mulmod61(self.a[which], x) + np.uint64(self.b[which])
        s = _reduce(s)
        return (s % np.uint64(m)).astype(np.int64)

    def hash_scalar(self, index: int, which: int, m: int) -> int:
        """Pure-Python reference; used to cross-check the vectorized path."""
        x = int(index) % (1 << 64)
        return ((self.a[which] * x + self.b[which]) % MERSENNE_61) % m
