"""Compressed-row sparse matrices and the handful of kernels the solver needs.

:class:`SparseMatrix` owns the CSR arrays; the heavy lifting is delegated to
:mod:`scipy.sparse`, which accepts the arrays without copying.  Matrices are
treated as immutable once built.
"""

from __future__ import annotations

import io
import os
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp

__all__ = [
    "SparseMatrix",
    "identity",
    "from_dense",
    "from_scipy",
    "matvec",
    "matvec_transpose",
    "spgemm",
    "kron",
    "transpose",
    "column_sumsq",
    "row_scale",
    "prune",
    "write_matrix_market",
    "read_matrix_market",
]

INDEX_DTYPE = np.int64


class SparseMatrix:
    """Immutable CSR matrix.

    Parameters
    ----------
    n_rows, n_cols : int
        Shape.
    row_offsets : array of int, length ``n_rows + 1``
    col_indices : array of int
        Column of each stored value; strictly increasing within a row.
    values : array of float
    check : bool
        Validate the CSR invariants (sorted, unique, in range).
    """

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, values, check=True):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=INDEX_DTYPE)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=INDEX_DTYPE)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        for arr in (self.row_offsets, self.col_indices, self.values):
            arr.flags.writeable = False
        if check:
            self._validate()

    def _validate(self):
        ro, ci = self.row_offsets, self.col_indices
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("negative dimension")
        if ro.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have length n_rows + 1")
        if ro[0] != 0 or ro[-1] != len(self.values) or len(ci) != len(self.values):
            raise ValueError("row_offsets inconsistent with stored values")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if len(ci):
            if ci.min() < 0 or ci.max() >= self.n_cols:
                raise ValueError("column index out of range")
            # strictly increasing inside each row; a row start may drop
            steps = np.diff(ci)
            row_start = np.zeros(len(ci), dtype=bool)
            row_start[ro[:-1][ro[:-1] < len(ci)]] = True
            if np.any((steps <= 0) & ~row_start[1:]):
                raise ValueError("column indices must be strictly increasing within rows")

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return len(self.values)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        """Zero-copy scipy view of this matrix."""
        m = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=self.shape,
            copy=False,
        )
        m.has_sorted_indices = True
        m.has_canonical_format = True
        return m

    @cached_property
    def csr_t(self) -> sp.csr_matrix:
        """Cached explicit transpose, for operators applied transposed many times."""
        return self.csr.T.tocsr()

    def toarray(self):
        return self.csr.toarray()

    def diagonal(self):
        return self.csr.diagonal()

    def __matmul__(self, other):
        if isinstance(other, SparseMatrix):
            return spgemm(self, other)
        return matvec(self, other)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


def from_scipy(m) -> SparseMatrix:
    """Wrap any scipy sparse matrix, canonicalising duplicates and ordering."""
    m = sp.csr_matrix(m, dtype=np.float64)
    if not m.has_canonical_format:
        m = m.copy()
        m.sum_duplicates()
    m.sort_indices()
    return SparseMatrix(m.shape[0], m.shape[1], m.indptr, m.indices, m.data, check=False)


def from_dense(a) -> SparseMatrix:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    return from_scipy(sp.csr_matrix(a))


def identity(n: int) -> SparseMatrix:
    idx = np.arange(n, dtype=INDEX_DTYPE)
    return SparseMatrix(n, n, np.arange(n + 1), idx, np.ones(n), check=False)


def _vector(v, n, what):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != n:
        raise ValueError(f"{what}: expected vector of length {n}, got shape {v.shape}")
    return v


def matvec(m: SparseMatrix, v) -> np.ndarray:
    """Return ``m @ v``."""
    return m.csr @ _vector(v, m.n_cols, "matvec")


def matvec_transpose(m: SparseMatrix, v) -> np.ndarray:
    """Return ``m.T @ v``.

    Uses the cached transpose if one has already been built, otherwise a
    scatter pass over the rows of ``m``.
    """
    v = _vector(v, m.n_rows, "matvec_transpose")
    if "csr_t" in m.__dict__:
        return m.csr_t @ v
    return m.csr.T @ v


def spgemm(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Sparse-sparse product with merged duplicates and sorted rows."""
    if a.n_cols != b.n_rows:
        raise ValueError(f"spgemm: inner dimensions differ ({a.shape} @ {b.shape})")
    return from_scipy(a.csr @ b.csr)


def kron(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Kronecker product; entry ``(ia*b.n_rows+ib, ja*b.n_cols+jb) = a[ia,ja]*b[ib,jb]``."""
    return from_scipy(sp.kron(a.csr, b.csr, format="csr"))


def transpose(m: SparseMatrix) -> SparseMatrix:
    return from_scipy(m.csr.T.tocsr())


def column_sumsq(m: SparseMatrix) -> np.ndarray:
    """Sum of squares of each column, i.e. ``diag(m.T @ m)``."""
    out = np.zeros(m.n_cols)
    np.add.at(out, m.col_indices, m.values * m.values)
    return out


def row_scale(d, m: SparseMatrix) -> SparseMatrix:
    """``diag(d) @ m`` keeping the sparsity pattern of ``m`` (zeros stay stored)."""
    d = _vector(d, m.n_rows, "row_scale")
    counts = np.diff(m.row_offsets)
    vals = m.values * np.repeat(d, counts)
    return SparseMatrix(m.n_rows, m.n_cols, m.row_offsets, m.col_indices, vals, check=False)


def prune(m: SparseMatrix, eps: float = 0.0) -> SparseMatrix:
    """Drop stored entries with ``|value| <= eps``."""
    keep = np.abs(m.values) > eps
    rows = np.repeat(np.arange(m.n_rows), np.diff(m.row_offsets))[keep]
    offsets = np.zeros(m.n_rows + 1, dtype=INDEX_DTYPE)
    np.cumsum(np.bincount(rows, minlength=m.n_rows), out=offsets[1:])
    return SparseMatrix(m.n_rows, m.n_cols, offsets, m.col_indices[keep], m.values[keep], check=False)


_MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix_market(path, m: SparseMatrix) -> None:
    """Write ``m`` in coordinate format with 1-based indices.

    Values are written with 17 significant digits so a read-back is exact.
    """
    rows = np.repeat(np.arange(1, m.n_rows + 1), np.diff(m.row_offsets))
    buf = io.StringIO()
    buf.write(_MM_HEADER + "\n")
    buf.write(f"{m.n_rows} {m.n_cols} {m.nnz}\n")
    if m.nnz:
        table = np.empty(m.nnz, dtype=[("i", np.int64), ("j", np.int64), ("v", np.float64)])
        table["i"] = rows
        table["j"] = m.col_indices + 1
        table["v"] = m.values
        np.savetxt(buf, table, fmt=["%d", "%d", "%.17g"])
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_matrix_market(path) -> SparseMatrix:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
    if not header.lower().startswith("%%matrixmarket matrix coordinate"):
        raise ValueError(f"{path}: not a coordinate Matrix Market file")
    return from_scipy(scipy.io.mmread(path))
