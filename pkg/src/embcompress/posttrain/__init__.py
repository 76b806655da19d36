"""Post-training compressors for frozen embedding matrices."""

from __future__ import annotations

import time

import numpy as np

from ..core.checkpoint import Container
from ..core.errors import FeasibilityError, InvalidArgument
from .base import Codec, IdentityCodec, IntCodec, norm_groups
from .dedup import DedupCodec, LshParams, lsh_signature
from .kmeans import kmeans
from .pq import MagPqCodec, PqCodec
from .prune import ThresholdPruneCodec, find_threshold
from .svd import MagSvdCodec, SvdCodec
from .tt import TtCodec, tt_svd

# method tag -> codec class
METHODS = {
    "identity": IdentityCodec,
    "tt": TtCodec,
    "dedup": DedupCodec,
    "pq": PqCodec,
    "magpq": MagPqCodec,
    "int8_16": IntCodec,
    "svd": SvdCodec,
    "magsvd": MagSvdCodec,
    "prune": ThresholdPruneCodec,
}

_BY_KIND = {cls.kind: cls for cls in METHODS.values()}


def fit_codec(method: str, matrix, params: dict | None = None, seed: int = 0) -> Codec:
    try:
        cls = METHODS[method]
    except KeyError:
        raise InvalidArgument(f"unknown post-training method {method!r}") from None
    return cls.fit(matrix, seed=seed, **(params or {}))


def compress(matrix, plan, seed: int = 0):
    """Fit the codec described by ``plan``; returns ``(codec, bytes, seconds)``."""
    if not plan.feasible:
        raise FeasibilityError(
            f"{plan.method} cannot meet {plan.target_bytes} bytes", nearest_bytes=plan.achieved_bytes
        )
    matrix = np.asarray(matrix)
    start = time.perf_counter()
    codec = fit_codec(plan.method, matrix, plan.params, seed)
    seconds = time.perf_counter() - start
    return codec, codec.nbytes(), seconds


def codec_from_container(c: Container) -> Codec:
    try:
        return _BY_KIND[c.kind].from_container(c)
    except KeyError:
        raise InvalidArgument(f"{c.kind!r} is not a codec") from None


__all__ = [
    "Codec",
    "DedupCodec",
    "IdentityCodec",
    "IntCodec",
    "LshParams",
    "METHODS",
    "MagPqCodec",
    "MagSvdCodec",
    "PqCodec",
    "SvdCodec",
    "ThresholdPruneCodec",
    "TtCodec",
    "codec_from_container",
    "compress",
    "find_threshold",
    "fit_codec",
    "kmeans",
    "lsh_signature",
    "norm_groups",
    "tt_svd",
]
