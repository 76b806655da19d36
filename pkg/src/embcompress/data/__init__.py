"""Datasets: the synthetic power-law generator and the CSV loader."""

from .csvload import CsvSchema, load_csv, log_transform
from .dataset import Batch, Dataset
from .synthetic import DEFAULT_CARDINALITIES, SyntheticSpec, generate, skew_summary

__all__ = [
    "Batch",
    "CsvSchema",
    "DEFAULT_CARDINALITIES",
    "Dataset",
    "SyntheticSpec",
    "generate",
    "load_csv",
    "log_transform",
    "skew_summary",
]
