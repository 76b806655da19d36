"""AUC, top-k recall overlap, batch latency and the per-run metrics record."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from ..core.errors import InvalidArgument, UndefinedMetric


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic.

    Tied scores share their average rank, which counts each tied
    positive/negative pair as one half.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.size != labels.size:
        raise InvalidArgument("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest entries per row; ties go to lower indices."""
    scores = np.atleast_2d(scores)
    n = scores.shape[1]
    if k >= n:
        return np.tile(np.arange(n), (scores.shape[0], 1))
    out = np.empty((scores.shape[0], k), dtype=np.int64)
    for q, row in enumerate(scores):
        kth = np.partition(row, n - k)[n - k]
        above = np.flatnonzero(row > kth)
        ties = np.flatnonzero(row == kth)[: k - above.size]
        out[q] = np.concatenate([above, ties])
    return out


def _decoded(source, batch: int = 1024) -> np.ndarray:
    if isinstance(source, np.ndarray):
        return source
    n = source.n
    return np.concatenate([source.decompress_batch(np.arange(s, min(s + batch, n)))
                           for s in range(0, n, batch)])


def recall_overlap(full, codec, queries, k: int) -> float:
    """Mean ``|topk(full) & topk(decoded)| / k`` under inner-product scoring.

    ``codec`` may be anything with ``decompress_batch`` or a plain matrix.
    """
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    full = np.asarray(full, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != full.shape[1]:
        raise InvalidArgument(f"query width {queries.shape[1]} != matrix width {full.shape[1]}")
    if k > full.shape[0]:
        raise InvalidArgument(f"k={k} exceeds the {full.shape[0]} rows")
    approx = _decoded(codec).astype(np.float64)
    truth = top_k(queries @ full.T, k)
    found = top_k(queries @ approx.T, k)
    hits = [np.intersect1d(a, b).size for a, b in zip(truth, found)]
    return float(np.mean(hits) / k)


def time_batch(target, batch, repeats: int = 3) -> float:
    """Median seconds of ``repeats`` timed passes after one untimed warm-up.

    ``target`` is a frozen store (``lookup``), a codec (``decompress_batch``)
    or any callable taking the batch.
    """
    if repeats < 3:
        raise InvalidArgument("need at least three repeats")
    fn = getattr(target, "lookup", None) or getattr(target, "decompress_batch", None) or target
    fn(batch)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(batch)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


@dataclass
class MetricsReport:
    auc: float
    inference_bytes: int
    training_bytes: int
    train_seconds: float
    batch_latency_seconds: float
    recall_at_k: float | None = None

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value is None:
                continue
            if not math.isfinite(value) or value < 0:
                raise InvalidArgument(f"{name} must be finite and non-negative, got {value}")
        if self.auc > 1:
            raise InvalidArgument(f"auc must lie in [0, 1], got {self.auc}")

    def to_dict(self) -> dict:
        return asdict(self)
