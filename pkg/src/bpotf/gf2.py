"""Sparse binary matrices and linear algebra over GF(2)."""

from __future__ import annotations

from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class DimensionError(ValueError):
    """Raised when operand shapes do not agree."""


def as_bits(v, length: int | None = None) -> np.ndarray:
    """Return ``v`` as a ``uint8`` 0/1 array, validating values and length."""
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-d bit vector, got shape {arr.shape}")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit vector entries must be 0 or 1")
    if length is not None and arr.size != length:
        raise DimensionError(f"expected length {length}, got {arr.size}")
    return arr.astype(np.uint8)


def _canonical_support(indices: Iterable[int], bound: int, what: str) -> np.ndarray:
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size == 0:
        return idx
    if idx.min() < 0 or idx.max() >= bound:
        raise IndexError(f"{what} index out of range [0, {bound})")
    # duplicates cancel pairwise
    uniq, counts = np.unique(idx, return_counts=True)
    return uniq[counts % 2 == 1]


class SparseBinaryMatrix:
    """Binary matrix stored by column and by row.

    Supports are kept sorted and duplicate entries given at construction
    cancel in pairs, so two matrices with the same GF(2) content compare
    equal. Instances are treated as immutable.

    Parameters
    ----------
    num_rows, num_cols : int
        Shape of the matrix.
    col_support : sequence of sequences of int, optional
        Row indices of the non-zero entries of every column.
    """

    def __init__(self, num_rows: int, num_cols: int,
                 col_support: Sequence[Iterable[int]] | None = None):
        if num_rows < 0 or num_cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        self.num_rows = int(num_rows)
        self.num_cols = int(num_cols)
        if col_support is None:
            col_support = [()] * self.num_cols
        if len(col_support) != self.num_cols:
            raise DimensionError(
                f"got {len(col_support)} column supports for {self.num_cols} columns")
        cols = [_canonical_support(c, self.num_rows, "row") for c in col_support]
        weights = np.array([c.size for c in cols], dtype=np.int64)
        self.col_ptr = np.zeros(self.num_cols + 1, dtype=np.int64)
        np.cumsum(weights, out=self.col_ptr[1:])
        self.col_idx = (np.concatenate(cols) if cols else np.zeros(0)).astype(np.int64)
        self._build_rows()

    @classmethod
    def _from_csc(cls, num_rows: int, num_cols: int, col_ptr: np.ndarray,
                  col_idx: np.ndarray) -> "SparseBinaryMatrix":
        # trusted fast path: supports already canonical
        obj = cls.__new__(cls)
        obj.num_rows = int(num_rows)
        obj.num_cols = int(num_cols)
        obj.col_ptr = np.ascontiguousarray(col_ptr, dtype=np.int64)
        obj.col_idx = np.ascontiguousarray(col_idx, dtype=np.int64)
        obj._build_rows()
        return obj

    def _build_rows(self) -> None:
        col_of_entry = np.repeat(np.arange(self.num_cols, dtype=np.int64),
                                 np.diff(self.col_ptr))
        order = np.lexsort((col_of_entry, self.col_idx))
        self.row_idx = col_of_entry[order]
        counts = np.bincount(self.col_idx, minlength=self.num_rows)
        self.row_ptr = np.zeros(self.num_rows + 1, dtype=np.int64)
        np.cumsum(counts, out=self.row_ptr[1:])
        # position in column-major storage of each row-major entry
        self.row_to_col_entry = order.astype(np.int64)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_dense(cls, a) -> "SparseBinaryMatrix":
        a = np.asarray(a) % 2
        if a.ndim != 2:
            raise DimensionError("dense matrix must be 2-d")
        m, n = a.shape
        return cls(m, n, [np.flatnonzero(a[:, j]) for j in range(n)])

    @classmethod
    def from_rows(cls, num_rows: int, num_cols: int,
                  row_support: Sequence[Iterable[int]]) -> "SparseBinaryMatrix":
        if len(row_support) != num_rows:
            raise DimensionError("row support count does not match num_rows")
        cols: list[list[int]] = [[] for _ in range(num_cols)]
        for i, row in enumerate(row_support):
            for j in row:
                if not 0 <= j < num_cols:
                    raise IndexError(f"column index {j} out of range")
                cols[j].append(i)
        return cls(num_rows, num_cols, cols)

    @classmethod
    def from_scipy(cls, a) -> "SparseBinaryMatrix":
        a = sp.csc_matrix(a)
        a.data = a.data % 2
        a.eliminate_zeros()
        a.sort_indices()
        return cls._from_csc(a.shape[0], a.shape[1], a.indptr, a.indices)

    @classmethod
    def identity(cls, n: int) -> "SparseBinaryMatrix":
        return cls._from_csc(n, n, np.arange(n + 1), np.arange(n))

    # -- accessors --------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_rows, self.num_cols)

    @property
    def nnz(self) -> int:
        return int(self.col_idx.size)

    def col(self, j: int) -> np.ndarray:
        return self.col_idx[self.col_ptr[j]:self.col_ptr[j + 1]]

    def row(self, i: int) -> np.ndarray:
        return self.row_idx[self.row_ptr[i]:self.row_ptr[i + 1]]

    @property
    def col_support(self) -> list[list[int]]:
        return [self.col(j).tolist() for j in range(self.num_cols)]

    @property
    def row_support(self) -> list[list[int]]:
        return [self.row(i).tolist() for i in range(self.num_rows)]

    @property
    def col_weights(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    @property
    def row_weights(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        data = np.ones(self.nnz, dtype=np.uint8)
        return sp.csr_matrix((data, self.row_idx, self.row_ptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.uint8)
        cols = np.repeat(np.arange(self.num_cols), self.col_weights)
        out[self.col_idx, cols] = 1
        return out

    @cached_property
    def dense(self) -> np.ndarray:
        """Read-only dense copy, built once."""
        out = self.to_dense()
        out.setflags(write=False)
        return out

    def column_vector(self, j: int) -> np.ndarray:
        v = np.zeros(self.num_rows, dtype=np.uint8)
        v[self.col(j)] = 1
        return v

    def select_columns(self, cols: Sequence[int]) -> "SparseBinaryMatrix":
        """Submatrix made of ``cols`` in the given order."""
        cols = np.asarray(cols, dtype=np.int64)
        w = self.col_weights[cols]
        ptr = np.zeros(cols.size + 1, dtype=np.int64)
        np.cumsum(w, out=ptr[1:])
        offsets = np.arange(ptr[-1]) - np.repeat(ptr[:-1], w)
        idx = self.col_idx[np.repeat(self.col_ptr[cols], w) + offsets]
        return SparseBinaryMatrix._from_csc(self.num_rows, cols.size, ptr, idx)

    def transpose(self) -> "SparseBinaryMatrix":
        return SparseBinaryMatrix._from_csc(self.num_cols, self.num_rows,
                                            self.row_ptr, self.row_idx)

    def hstack(self, other: "SparseBinaryMatrix") -> "SparseBinaryMatrix":
        if other.num_rows != self.num_rows:
            raise DimensionError("row counts differ")
        ptr = np.concatenate([self.col_ptr, other.col_ptr[1:] + self.nnz])
        return SparseBinaryMatrix._from_csc(self.num_rows, self.num_cols + other.num_cols,
                                            ptr, np.concatenate([self.col_idx, other.col_idx]))

    @cached_property
    def check_components(self) -> np.ndarray:
        """Connected-component label of every row in the Tanner graph.

        Two rows share a component when a chain of columns links them.
        Labels are numbered in order of the lowest row of each component.
        """
        m, n = self.shape
        cols = np.repeat(np.arange(n), self.col_weights) + m
        rows = self.col_idx
        adj = sp.coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)),
                            shape=(m + n, m + n))
        _, labels = connected_components(adj, directed=False)
        row_labels = labels[:m]
        # relabel by first appearance so labels are deterministic
        _, first, inverse = np.unique(row_labels, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return rank[inverse].astype(np.int64)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseBinaryMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.col_ptr, other.col_ptr)
                and np.array_equal(self.col_idx, other.col_idx))

    __hash__ = object.__hash__

    def __repr__(self) -> str:
        return f"SparseBinaryMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz})"


def matvec_mod2(M: SparseBinaryMatrix, v) -> np.ndarray:
    """Compute ``M @ v`` over GF(2)."""
    v = as_bits(v, M.num_cols)
    return (M.csr @ v.astype(np.int64) % 2).astype(np.uint8)


def matmul_mod2(A: SparseBinaryMatrix, B: SparseBinaryMatrix) -> SparseBinaryMatrix:
    if A.num_cols != B.num_rows:
        raise DimensionError(f"cannot multiply {A.shape} by {B.shape}")
    prod = (A.csr.astype(np.int64) @ B.csr.astype(np.int64)).tocsc()
    return SparseBinaryMatrix.from_scipy(prod)


# -- elimination -------------------------------------------------------------

def _pack_columns(dense: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix row-wise into uint64 words, column j at bit j."""
    m, n = dense.shape
    nwords = max(1, (n + 63) // 64)
    bytes_ = np.packbits(dense.astype(np.uint8), axis=1, bitorder="little")
    padded = np.zeros((m, nwords * 8), dtype=np.uint8)
    padded[:, :bytes_.shape[1]] = bytes_
    return padded.view(np.uint64).copy()


@numba.njit(cache=True, nogil=True)
def _eliminate_packed(A, b, n):
    """Row-reduce packed ``A`` in place, carrying ``b`` along.

    Pivots are taken left to right, the pivot row for each column being the
    first not-yet-used row holding a one. Returns the pivot columns and the
    row each pivot landed in (always ``0..rank-1``).
    """
    m = A.shape[0]
    nwords = A.shape[1]
    pivots = np.empty(min(m, n), dtype=np.int64)
    rank = 0
    for c in range(n):
        if rank >= m:
            break
        w = c >> 6
        bit = np.uint64(1) << np.uint64(c & 63)
        p = -1
        for r in range(rank, m):
            if A[r, w] & bit:
                p = r
                break
        if p < 0:
            continue
        if p != rank:
            for k in range(nwords):
                tmp = A[rank, k]
                A[rank, k] = A[p, k]
                A[p, k] = tmp
            tb = b[rank]
            b[rank] = b[p]
            b[p] = tb
        for r in range(m):
            if r != rank and (A[r, w] & bit):
                for k in range(w, nwords):
                    A[r, k] ^= A[rank, k]
                b[r] ^= b[rank]
        pivots[rank] = c
        rank += 1
    return pivots[:rank]


def _reduce_dense(dense: np.ndarray, rhs: np.ndarray | None = None):
    m, n = dense.shape
    A = _pack_columns(dense)
    b = np.zeros(m, dtype=np.uint8) if rhs is None else rhs.astype(np.uint8).copy()
    pivots = _eliminate_packed(A, b, n)
    return pivots, b


def row_reduce(M: SparseBinaryMatrix) -> tuple[int, list[int]]:
    """GF(2) rank of ``M`` and its left-to-right pivot columns."""
    if M.num_rows == 0 or M.num_cols == 0:
        return 0, []
    pivots, _ = _reduce_dense(M.to_dense())
    return int(pivots.size), pivots.tolist()


def rank(M: SparseBinaryMatrix) -> int:
    return row_reduce(M)[0]


def solve_on_columns(dense: np.ndarray, s: np.ndarray) -> np.ndarray | None:
    """One solution ``x`` of ``dense @ x = s`` supported on pivot columns.

    Returns ``None`` when ``s`` is not in the column space.
    """
    m, n = dense.shape
    x = np.zeros(n, dtype=np.uint8)
    if m == 0:
        return x
    pivots, b = _reduce_dense(dense, s)
    r = pivots.size
    if np.any(b[r:]):
        return None
    x[pivots] = b[:r]
    return x


def in_image(M: SparseBinaryMatrix, s) -> tuple[bool, np.ndarray | None]:
    """Whether ``s`` is a GF(2) combination of the columns of ``M``.

    Returns ``(True, witness)`` with ``M @ witness == s`` or ``(False, None)``.
    """
    s = as_bits(s, M.num_rows)
    if not s.any():
        return True, np.zeros(M.num_cols, dtype=np.uint8)
    if M.num_cols == 0:
        return False, None
    x = solve_on_columns(M.to_dense(), s)
    return (x is not None), x


# -- alist format ------------------------------------------------------------

def write_alist(M: SparseBinaryMatrix, path: str | Path) -> None:
    """Write ``M`` in MacKay's alist format (1-based, zero padded)."""
    cw, rw = M.col_weights, M.row_weights
    max_c = int(cw.max()) if cw.size else 0
    max_r = int(rw.max()) if rw.size else 0

    def padded(idx, width):
        vals = [str(int(i) + 1) for i in idx] + ["0"] * (width - len(idx))
        return " ".join(vals)

    lines = [f"{M.num_cols} {M.num_rows}", f"{max_c} {max_r}",
             " ".join(map(str, cw)), " ".join(map(str, rw))]
    lines += [padded(M.col(j), max_c) for j in range(M.num_cols)]
    lines += [padded(M.row(i), max_r) for i in range(M.num_rows)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path: str | Path) -> SparseBinaryMatrix:
    tokens = [int(t) for t in Path(path).read_text().split()]
    try:
        n, m, max_c, max_r = tokens[:4]
        pos = 4 + n + m  # skip the weight lists
        cols = []
        for _ in range(n):
            entries = tokens[pos:pos + max_c]
            if len(entries) != max_c:
                raise ValueError
            cols.append([e - 1 for e in entries if e > 0])
            pos += max_c
    except ValueError:
        raise ValueError(f"truncated alist file: {path}") from None
    M = SparseBinaryMatrix(m, n, cols)
    rows_given = []
    for _ in range(m):
        entries = tokens[pos:pos + max_r]
        rows_given.append(sorted(e - 1 for e in entries if e > 0))
        pos += max_r
    if rows_given != M.row_support:
        raise ValueError(f"alist row and column lists disagree: {path}")
    return M
