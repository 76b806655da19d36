from .checkpoint import Container, CheckpointError
from .features import FeatureSpace
from .hashing import HashFamily, MERSENNE_61
from .memory import (
    baseline_bytes,
    compression_ratio,
    coo_bytes,
    csr_bytes,
    dense_bytes,
    max_sparse_nnz,
    sparse_bytes,
)

__all__ = [
    "Container",
    "CheckpointError",
    "FeatureSpace",
    "HashFamily",
    "MERSENNE_61",
    "baseline_bytes",
    "compression_ratio",
    "coo_bytes",
    "csr_bytes",
    "dense_bytes",
    "max_sparse_nnz",
    "sparse_bytes",
]
