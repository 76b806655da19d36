"""Categorical feature space: fields, cardinalities and global id offsets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import check_ids


@dataclass(frozen=True)
class FeatureSpace:
    """A set of ``k`` categorical fields laid out on one global id axis.

    Field ``f`` owns the global ids ``offsets[f] .. offsets[f+1]-1``.
    """

    cardinalities: tuple[int, ...]
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cardinalities)
        if not cards:
            raise ValueError("a feature space needs at least one field")
        if any(c < 1 for c in cards):
            raise ValueError(f"cardinalities must be positive, got {cards}")
        object.__setattr__(self, "cardinalities", cards)
        offsets = np.zeros(len(cards) + 1, dtype=np.int64)
        np.cumsum(cards, out=offsets[1:])
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_counts(cls, cardinalities: Sequence[int]) -> "FeatureSpace":
        return cls(tuple(cardinalities))

    @property
    def k(self) -> int:
        return len(self.cardinalities)

    @property
    def n(self) -> int:
        return int(self.offsets[-1])

    def field_of(self, ids) -> np.ndarray:
        """Field index of each global id."""
        ids = self.check_ids(ids)
        return np.searchsorted(self.offsets, ids, side="right") - 1

    def to_global(self, field_idx: int, local) -> np.ndarray:
        local = np.asarray(local, dtype=np.int64)
        if np.any(local < 0) or np.any(local >= self.cardinalities[field_idx]):
            raise ValueError(f"local id out of range for field {field_idx}")
        return local + self.offsets[field_idx]

    def check_ids(self, ids) -> np.ndarray:
        return check_ids(ids, self.n)
