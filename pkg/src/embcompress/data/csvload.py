"""CSV ingestion for Criteo/Avazu-style files."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core.errors import ConfigError, ParseError
from ..core.features import FeatureSpace
from .dataset import Dataset

OOV = 0


@dataclass(frozen=True)
class CsvSchema:
    """Which header columns hold the label, the categorical and the numeric features."""

    label: str
    categorical: tuple[str, ...]
    numeric: tuple[str, ...] = ()
    log_transform: bool = False
    splits: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0


def log_transform(values: np.ndarray) -> np.ndarray:
    return np.log1p(np.maximum(values, 0.0))


def load_csv(path, schema: CsvSchema, vocab: list[dict] | None = None) -> Dataset:
    """Read a CSV into a Dataset.

    Local id 0 of every field is reserved for out-of-vocabulary values; an
    empty cell maps there too. Without ``vocab`` the dictionary is built
    from this file in first-seen order. With ``vocab`` (from an earlier
    load) it is reused and unseen strings map to the OOV id. Empty numeric
    cells read as 0.
    """
    path = Path(path)
    if not schema.categorical:
        raise ConfigError("schema needs at least one categorical column")
    grow = vocab is None
    vocab = [dict() for _ in schema.categorical] if grow else [dict(v) for v in vocab]
    if len(vocab) != len(schema.categorical):
        raise ConfigError("vocabulary does not match the schema's categorical columns")
    ids, dense, labels = [], [], []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigError(f"{path} is empty")
        cols = {name: i for i, name in enumerate(header)}
        missing = [c for c in (schema.label, *schema.categorical, *schema.numeric) if c not in cols]
        if missing:
            raise ConfigError(f"{path}: header lacks columns {missing}")
        li = cols[schema.label]
        ci = [cols[c] for c in schema.categorical]
        ni = [cols[c] for c in schema.numeric]
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", line)
            try:
                y = float(row[li])
            except ValueError:
                raise ParseError(f"label {row[li]!r} is not a number", line) from None
            if y not in (0.0, 1.0):
                raise ParseError(f"label {row[li]!r} is not 0 or 1", line)
            try:
                nums = [float(row[i]) if row[i].strip() else 0.0 for i in ni]
            except ValueError as exc:
                raise ParseError(f"bad numeric cell ({exc})", line) from None
            local = []
            for f, i in enumerate(ci):
                cell = row[i]
                if cell == "":
                    local.append(OOV)
                elif cell in vocab[f]:
                    local.append(vocab[f][cell])
                elif grow:
                    vocab[f][cell] = len(vocab[f]) + 1
                    local.append(vocab[f][cell])
                else:
                    local.append(OOV)
            ids.append(local)
            dense.append(nums)
            labels.append(y)
    if not labels:
        raise ConfigError(f"{path} has no data rows")
    space = FeatureSpace(tuple(len(v) + 1 for v in vocab))
    local = np.asarray(ids, dtype=np.int64)
    dense = np.asarray(dense, dtype=np.float64).reshape(len(labels), len(ni))
    if schema.log_transform:
        dense = log_transform(dense)
    return Dataset.with_splits(space, local + space.offsets[:-1], dense.astype(np.float32),
                               np.asarray(labels, dtype=np.float32), schema.splits, seed=schema.seed,
                               source={"csv": str(path)}, vocab=[dict(v) for v in vocab])
