"""In-memory CTR dataset with seeded train/validation/test splits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.checkpoint import Container
from ..core.errors import ConfigError
from ..core.features import FeatureSpace

SPLITS = ("train", "val", "test")


@dataclass
class Batch:
    ids: np.ndarray
    dense: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.labels.size


@dataclass
class Dataset:
    """Global feature ids ``(N, k)``, dense features ``(N, p)`` and 0/1 labels.

    ``split`` holds 0/1/2 (train/val/test) per sample.
    """

    space: FeatureSpace
    ids: np.ndarray
    dense: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    source: dict = field(default_factory=dict)
    vocab: list | None = None

    @classmethod
    def with_splits(cls, space, ids, dense, labels, fractions=(0.8, 0.1, 0.1), seed=0, **kw):
        fractions = np.asarray(fractions, dtype=np.float64)
        if fractions.size != 3 or np.any(fractions < 0) or not np.isclose(fractions.sum(), 1.0):
            raise ConfigError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
        count = labels.size
        order = np.random.default_rng([seed, 0x5D17]).permutation(count)
        bounds = np.floor(np.cumsum(fractions)[:2] * count + 1e-9).astype(np.int64)
        split = np.empty(count, dtype=np.uint8)
        split[order[: bounds[0]]] = 0
        split[order[bounds[0]: bounds[1]]] = 1
        split[order[bounds[1]:]] = 2
        space.check_ids(ids)
        return cls(space, np.asarray(ids, np.int64), np.asarray(dense, np.float32),
                   np.asarray(labels, np.float32), split, **kw)

    def __len__(self) -> int:
        return self.labels.size

    @property
    def dense_dim(self) -> int:
        return self.dense.shape[1]

    def part(self, name: str) -> Batch:
        sel = np.flatnonzero(self.split == SPLITS.index(name))
        return Batch(self.ids[sel], self.dense[sel], self.labels[sel])

    def batches(self, name: str, batch_size: int, rng: np.random.Generator | None = None):
        """Mini-batches of one split, shuffled when ``rng`` is given."""
        sel = np.flatnonzero(self.split == SPLITS.index(name))
        if rng is not None:
            sel = sel[rng.permutation(sel.size)]
        for s in range(0, sel.size, batch_size):
            idx = sel[s:s + batch_size]
            yield Batch(self.ids[idx], self.dense[idx], self.labels[idx])

    def to_container(self) -> Container:
        meta = {"cardinalities": list(self.space.cardinalities), "source": self.source}
        if self.vocab is not None:
            meta["vocab"] = self.vocab
        arrays = {"ids": self.ids.astype(np.int64), "dense": self.dense, "labels": self.labels,
                  "split": self.split}
        return Container("dataset", meta, arrays)

    @classmethod
    def from_container(cls, c: Container) -> "Dataset":
        if c.kind != "dataset":
            raise ConfigError(f"expected a dataset checkpoint, found {c.kind}")
        a = c.arrays
        return cls(FeatureSpace(tuple(c.meta["cardinalities"])), a["ids"], a["dense"], a["labels"], a["split"],
                   source=c.meta.get("source", {}), vocab=c.meta.get("vocab"))
