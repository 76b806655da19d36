"""Trainable compressed embedding stores and the plan-to-store factory."""

from __future__ import annotations

import numpy as np

from ..core.checkpoint import Container
from ..core.errors import FeasibilityError, InvalidArgument
from ..core.features import FeatureSpace
from .adaptive import AdaptiveTable
from .base import EmbeddingStore
from .codec_store import CodecStore
from .mde import MixedDimTable, mixed_dims
from .pruned import PrunedTable, scheduled_density
from .quant import AlptTable, Fp16Table, QuantizedTable, quantize, dequantize, stochastic_round
from .tables import CompoTable, DoubleHashTable, FullTable, MEmComTable, RobeArray
from .tt import TtRecTable

STORE_TYPES = {
    cls.kind: cls
    for cls in (FullTable, DoubleHashTable, CompoTable, MEmComTable, RobeArray, TtRecTable,
                QuantizedTable, Fp16Table, AlptTable, MixedDimTable, PrunedTable, AdaptiveTable)
}

TRAIN_METHODS = ("full", "double_hash", "compo", "memcom", "robe", "tt_rec", "dedup", "mgqe",
                 "adapt", "int8_16", "fp16", "alpt", "mde", "deeplight")


def build_store(plan, space: FeatureSpace, d: int, seed: int = 0, dtype=np.float32,
                nearest: bool = False) -> EmbeddingStore:
    """Instantiate the trainable store a plan describes.

    Infeasible plans raise unless ``nearest`` is set, in which case the
    nearest reachable configuration recorded in the plan is built.
    """
    if not plan.feasible and (not nearest or plan.achieved_bytes <= 0):
        raise FeasibilityError(f"plan for {plan.method} is infeasible", nearest_bytes=plan.achieved_bytes)
    n, p, m = space.n, plan.params, plan.method
    common = {"seed": seed, "dtype": dtype}
    if m == "full":
        return FullTable(n, d, **common)
    if m == "double_hash":
        return DoubleHashTable(n, d, p["m"], **common)
    if m == "compo":
        return CompoTable(n, d, p["m1"], p["m2"], **common)
    if m == "memcom":
        return MEmComTable(n, d, p["m"], **common)
    if m == "robe":
        return RobeArray(n, d, p["size"], chunk=p["chunk"], **common)
    if m == "tt_rec":
        return TtRecTable(n, d, p["row_factors"], p["col_factors"], p["ranks"], **common)
    if m == "dedup":
        return CodecStore(n, d, "dedup", p["codec"], **common)
    if m == "mgqe":
        return CodecStore(n, d, "magpq", p["codec"], codec_in_training=True, **common)
    if m == "adapt":
        return AdaptiveTable(n, d, p["m"], threshold=p["threshold"], capacity=p["capacity"],
                             overflow="stop", **common)
    if m == "int8_16":
        return QuantizedTable(n, d, bits=p["bits"], granularity="table", **common)
    if m == "fp16":
        return Fp16Table(n, d, **common)
    if m == "alpt":
        return AlptTable(n, d, bits=p["bits"], **common)
    if m == "mde":
        return MixedDimTable(space, d, p["dims"], **common)
    if m == "deeplight":
        return PrunedTable(n, d, target_density=p["density"], **common)
    raise InvalidArgument(f"unknown training method {m!r}")


def store_from_container(c: Container) -> EmbeddingStore:
    """Rebuild a frozen store from its checkpoint container."""
    if c.kind in STORE_TYPES:
        return STORE_TYPES[c.kind].from_container(c)
    if "store_method" in c.meta:
        return CodecStore.from_codec_container(c)
    raise InvalidArgument(f"{c.kind!r} is not a store checkpoint")


__all__ = [
    "AdaptiveTable",
    "AlptTable",
    "CodecStore",
    "CompoTable",
    "DoubleHashTable",
    "EmbeddingStore",
    "Fp16Table",
    "FullTable",
    "MEmComTable",
    "MixedDimTable",
    "PrunedTable",
    "QuantizedTable",
    "RobeArray",
    "STORE_TYPES",
    "TRAIN_METHODS",
    "TtRecTable",
    "build_store",
    "dequantize",
    "mixed_dims",
    "quantize",
    "scheduled_density",
    "stochastic_round",
    "store_from_container",
]
