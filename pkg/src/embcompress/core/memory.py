"""Byte-exact memory model for embedding storage.

Every reported memory number in the package comes from these formulas,
never from process-level measurement.
"""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal

import numpy as np

F32 = 4
F16 = 2
I16 = 2
I8 = 1
INDEX = 4

WIDTHS = {"f32": F32, "f16": F16, "i16": I16, "i8": I8, "u8": 1, "u16": 2, "index32": INDEX}


def dense_bytes(rows: int, cols: int, width: int = F32) -> int:
    return int(rows) * int(cols) * int(width)


def csr_bytes(rows: int, nnz: int, value_width: int = F32) -> int:
    return int(nnz) * (value_width + INDEX) + (int(rows) + 1) * INDEX


def coo_bytes(nnz: int, value_width: int = F32) -> int:
    return int(nnz) * (value_width + 2 * INDEX)


def sparse_bytes(rows: int, cols: int, nnz: int, value_width: int = F32) -> tuple[str, int]:
    """Cheaper of CSR and COO for a ``rows x cols`` matrix holding ``nnz`` values.

    CSR wins ties. The caller decides whether dense storage is cheaper still.
    """
    if nnz < 0 or nnz > rows * cols:
        raise ValueError(f"nnz={nnz} impossible for a {rows}x{cols} matrix")
    csr = csr_bytes(rows, nnz, value_width)
    coo = coo_bytes(nnz, value_width)
    return ("csr", csr) if csr <= coo else ("coo", coo)


def max_sparse_nnz(rows: int, cols: int, budget: int, value_width: int = F32) -> tuple[str, int]:
    """Largest nnz whose adaptive sparse payload fits ``budget`` bytes."""
    csr = (int(budget) - (rows + 1) * INDEX) // (value_width + INDEX)
    coo = int(budget) // (value_width + 2 * INDEX)
    csr, coo = min(max(csr, -1), rows * cols), min(coo, rows * cols)
    if csr < 0 and coo < 0:
        return "coo", -1
    return ("csr", csr) if csr >= coo else ("coo", coo)


def baseline_bytes(space_or_n, d: int) -> int:
    """Bytes of the uncompressed FP32 ``n x d`` table."""
    n = getattr(space_or_n, "n", space_or_n)
    return dense_bytes(n, d, F32)


def compression_ratio(baseline: int, compressed: int) -> float:
    if compressed <= 0:
        raise ValueError("compressed size must be positive")
    return float(baseline) / float(compressed)


def index_width(count: int) -> int:
    """Smallest unsigned code width (bytes) able to address ``count`` symbols."""
    if count <= 1 << 8:
        return 1
    if count <= 1 << 16:
        return 2
    return 4


def code_dtype(count: int) -> np.dtype:
    return np.dtype({1: np.uint8, 2: np.uint16, 4: np.uint32}[index_width(count)])


def percent_label(part: int, whole: int, places: int = 1) -> str:
    """``part / whole`` as a percentage rounded half-up from the exact
    integer ratio, so 31.25% prints as 31.3%."""
    exact = Decimal(100 * int(part)) / Decimal(int(whole))
    return f"{exact.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)}%"
