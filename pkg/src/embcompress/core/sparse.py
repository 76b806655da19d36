"""Row-gatherable CSR / COO storage with exact byte accounting."""

from __future__ import annotations

import numpy as np

from .memory import coo_bytes, csr_bytes, sparse_bytes


class SparseRows:
    """Sparse ``rows x cols`` FP32 matrix in CSR or COO form.

    Entries are kept sorted by ``(row, col)`` in both formats, so COO rows
    are located by binary search and CSR rows by the pointer array.
    """

    def __init__(self, fmt: str, shape, values, cols, row_ptr=None, row_idx=None):
        if fmt not in ("csr", "coo"):
            raise ValueError(f"unknown sparse format {fmt!r}")
        self.fmt = fmt
        self.shape = (int(shape[0]), int(shape[1]))
        self.values = np.asarray(values, dtype=np.float32)
        self.cols = np.asarray(cols, dtype=np.int32)
        self.row_ptr = None if row_ptr is None else np.asarray(row_ptr, dtype=np.int32)
        self.row_idx = None if row_idx is None else np.asarray(row_idx, dtype=np.int32)

    @classmethod
    def from_dense(cls, dense: np.ndarray, keep: np.ndarray | None = None, fmt: str | None = None):
        """Store the entries of ``dense`` selected by ``keep`` (default: non-zeros)."""
        if keep is None:
            keep = dense != 0
        r, c = np.nonzero(keep)
        vals = dense[r, c]
        rows, cols = dense.shape
        if fmt is None:
            fmt, _ = sparse_bytes(rows, cols, r.size)
        if fmt == "csr":
            ptr = np.zeros(rows + 1, dtype=np.int64)
            np.cumsum(np.bincount(r, minlength=rows), out=ptr[1:])
            return cls("csr", dense.shape, vals, c, row_ptr=ptr)
        return cls("coo", dense.shape, vals, c, row_idx=r)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def nbytes(self) -> int:
        if self.fmt == "csr":
            return csr_bytes(self.shape[0], self.nnz)
        return coo_bytes(self.nnz)

    def _bounds(self, ids):
        if self.fmt == "csr":
            return self.row_ptr[ids].astype(np.int64), self.row_ptr[ids + 1].astype(np.int64)
        return (np.searchsorted(self.row_idx, ids, side="left"),
                np.searchsorted(self.row_idx, ids, side="right"))

    def gather(self, ids, dtype=np.float32) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        out = np.zeros((ids.size, self.shape[1]), dtype=dtype)
        start, stop = self._bounds(ids)
        lens = stop - start
        total = int(lens.sum())
        if total == 0:
            return out
        owner = np.repeat(np.arange(ids.size), lens)
        first = np.repeat(start - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
        pos = first + np.arange(total)
        out[owner, self.cols[pos]] = self.values[pos]
        return out

    def to_dense(self) -> np.ndarray:
        return self.gather(np.arange(self.shape[0]))

    def arrays(self) -> dict[str, np.ndarray]:
        index = {"row_ptr": self.row_ptr} if self.fmt == "csr" else {"row_idx": self.row_idx}
        return {"values": self.values, "cols": self.cols, **index}

    @classmethod
    def from_arrays(cls, fmt, shape, arrays):
        return cls(fmt, shape, arrays["values"], arrays["cols"],
                   row_ptr=arrays.get("row_ptr"), row_idx=arrays.get("row_idx"))
