"""Frequency-adaptive table: shared hashed rows that graduate to exclusive rows."""

from __future__ import annotations

import numpy as np

from ..core.errors import CapacityError, InvalidArgument, StateError
from ..core.hashing import HashFamily
from ..core.memory import F32, INDEX
from .base import DEFAULT_INIT_STD, EmbeddingStore, normal_init


class AdaptiveTable(EmbeddingStore):
    """Low-frequency features share a hashed ``m x d`` table; once a feature
    has been observed ``threshold`` times it is promoted to its own row in a
    preallocated exclusive region, initialised from its shared row.

    While training, ``state[x]`` is ``-1 - count`` for a shared feature and
    the exclusive slot index once promoted. Freezing replaces it by the
    sorted list of promoted ids, padded to ``capacity``.
    """

    kind = "adaptive"

    def __init__(self, n, d, m, threshold=10, capacity=0, overflow="raise", seed=0, dtype=np.float32,
                 init_std=DEFAULT_INIT_STD, shared=None, exclusive=None, slot_ids=None):
        super().__init__(n, d, dtype)
        if m < 1 or threshold < 1 or capacity < 0:
            raise InvalidArgument("need m >= 1, threshold >= 1, capacity >= 0")
        if overflow not in ("raise", "stop"):
            raise InvalidArgument(f"unknown overflow policy {overflow!r}")
        self.m, self.threshold, self.capacity = int(m), int(threshold), int(capacity)
        self.overflow = overflow
        self.seed = int(seed)
        self.hashes = HashFamily(seed, 1)
        if shared is None:
            shared = normal_init(np.random.default_rng(seed + 1), (m, d), init_std, self.dtype)
        self.shared = np.array(shared, dtype=self.dtype)
        if exclusive is None:
            exclusive = np.zeros((capacity, d), dtype=self.dtype)
        self.exclusive = np.array(exclusive, dtype=self.dtype)
        self.slot_ids = None if slot_ids is None else np.asarray(slot_ids, dtype=np.int32)
        self.state = None if slot_ids is not None else np.full(n, -1, dtype=np.int32)
        self.used = 0 if slot_ids is None else int(np.count_nonzero(self.slot_ids < n))

    @property
    def promoted(self) -> np.ndarray:
        """Sorted ids that own an exclusive row."""
        if self.state is None:
            return self.slot_ids[: self.used].astype(np.int64)
        return np.flatnonzero(self.state >= 0)

    def counts(self) -> np.ndarray:
        if self.state is None:
            raise StateError("counters are dropped at freeze")
        return np.where(self.state < 0, -1 - self.state.astype(np.int64), self.threshold)

    def observe_and_promote(self, ids) -> int:
        """Count occurrences of ``ids``; promote features reaching the threshold."""
        if self.state is None:
            raise StateError("AdaptiveTable is frozen")
        ids = self.lookup_ids(ids)
        uniq, first, occ = np.unique(ids, return_index=True, return_counts=True)
        cur = self.state[uniq]
        shared = cur < 0
        uniq, first, occ, cur = uniq[shared], first[shared], occ[shared], cur[shared]
        newcount = (-1 - cur.astype(np.int64)) + occ
        cross = newcount >= self.threshold
        # first appearance in the batch decides slot order
        order = np.argsort(first[cross], kind="stable")
        winners = uniq[cross][order]
        room = self.capacity - self.used
        if winners.size > room:
            if self.overflow == "raise":
                raise CapacityError(f"exclusive region full: {winners.size} promotions, {room} free slots")
            winners = winners[:room]
        # features left waiting for a slot retry on their next occurrence
        self.state[uniq] = (-1 - np.minimum(newcount, self.threshold - 1)).astype(np.int32)
        if winners.size:
            slots = self.used + np.arange(winners.size)
            self.exclusive[slots] = self.shared[self.hashes(winners, 0, self.m)]
            self.state[winners] = slots.astype(np.int32)
            self.used += int(winners.size)
        return int(winners.size)

    def lookup_ids(self, ids):
        from ..core.errors import check_ids

        return check_ids(ids, self.n).ravel()

    def _slots_of(self, ids):
        if self.state is not None:
            return self.state[ids].astype(np.int64)
        pos = np.searchsorted(self.slot_ids, ids)
        pos = np.minimum(pos, max(self.capacity - 1, 0))
        hit = self.slot_ids[pos] == ids if self.capacity else np.zeros(ids.size, bool)
        return np.where(hit, pos, -1)

    def _lookup(self, ids):
        slot = self._slots_of(ids)
        out = self.shared[self.hashes(ids, 0, self.m)]
        own = slot >= 0
        out[own] = self.exclusive[slot[own]]
        return out

    def parameters(self):
        return {"shared": self.shared, "exclusive": self.exclusive}

    def _grads(self, ids, grads):
        slot = self._slots_of(ids)
        own = slot >= 0
        return {
            "shared": (self.hashes(ids[~own], 0, self.m), grads[~own]),
            "exclusive": (slot[own], grads[own]),
        }

    def freeze(self):
        if self.state is not None:
            ids = self.promoted
            slots = self.state[ids]
            exclusive = np.zeros_like(self.exclusive)
            exclusive[: ids.size] = self.exclusive[slots]
            self.exclusive = exclusive
            # sentinel n sorts after every real id
            self.slot_ids = np.full(self.capacity, self.n, dtype=np.int32)
            self.slot_ids[: ids.size] = ids
            self.state = None
        return super().freeze()

    def inference_bytes(self):
        return (self.m + self.capacity) * self.d * F32 + self.capacity * INDEX

    def parameter_bytes(self):
        return (self.m + self.capacity) * self.d * F32

    def training_bytes(self, moments: int = 2) -> int:
        # the per-feature state array replaces the sorted id list
        return (1 + moments) * self.parameter_bytes() + self.n * INDEX

    def _meta(self):
        return {"n": self.n, "d": self.d, "m": self.m, "threshold": self.threshold,
                "capacity": self.capacity, "seed": self.seed}

    def _arrays(self):
        if self.state is not None:
            raise StateError("freeze the AdaptiveTable before serializing")
        return {"shared": self.shared.astype(np.float32), "exclusive": self.exclusive.astype(np.float32),
                "slot_ids": self.slot_ids}

    @classmethod
    def from_container(cls, c):
        m, a = c.meta, c.arrays
        return cls(m["n"], m["d"], m["m"], threshold=m["threshold"], capacity=m["capacity"], seed=m["seed"],
                   shared=a["shared"], exclusive=a["exclusive"], slot_ids=a["slot_ids"]).freeze()
