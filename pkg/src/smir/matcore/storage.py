"""Matrix storage types and the deterministic kernels built on them.

All products here sum sequentially in increasing column index, one row at a
time.  numpy's ``sum``/``dot`` use pairwise or BLAS-blocked reductions whose
rounding depends on array length and alignment, so they are avoided wherever
the summation order is part of the contract.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

EPS = 2.0 ** -53
"""Unit roundoff of binary64."""


class DimensionError(ValueError):
    """Operand shapes do not agree."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_vector(x, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DimensionError(f"vector length {x.shape[0]} != {n}")
    return x


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    """Row-major dense matrix."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if a.ndim != 2:
            raise DimensionError(f"dense matrix must be 2-D, got shape {a.shape}")
        object.__setattr__(self, "data", _readonly(a))

    @classmethod
    def identity(cls, n: int) -> "DenseMatrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "DenseMatrix":
        return cls(np.zeros((rows, cols)))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def entries(self) -> np.ndarray:
        return self.data.ravel()

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.data))

    def to_dense(self) -> np.ndarray:
        return self.data.copy()

    def transpose(self) -> "DenseMatrix":
        return DenseMatrix(self.data.T)

    def __repr__(self):
        return f"DenseMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True, eq=False)
class BandedMatrix:
    """Square band matrix in diagonal-major storage.

    ``bands[upper_bw + i - j, j] == A[i, j]`` for entries inside the band,
    the layout LAPACK and ``scipy.linalg.solve_banded`` use.  Slots of
    ``bands`` that fall outside the matrix are kept at zero.
    """

    order: int
    lower_bw: int
    upper_bw: int
    bands: np.ndarray

    def __post_init__(self):
        n, p, q = self.order, self.lower_bw, self.upper_bw
        if p < 0 or q < 0:
            raise ValueError("bandwidths must be nonnegative")
        if n > 0 and p + q + 1 > n:
            raise ValueError(f"lower_bw + upper_bw + 1 = {p + q + 1} exceeds order {n}")
        ab = np.array(self.bands, dtype=np.float64, copy=True)
        if ab.shape != (p + q + 1, n):
            raise DimensionError(f"bands must have shape {(p + q + 1, n)}, got {ab.shape}")
        # zero the unused corners so that densify/band sums never see garbage
        for k in range(-p, q + 1):
            row = q - k
            if k > 0:
                ab[row, :k] = 0.0
            elif k < 0:
                ab[row, n + k:] = 0.0
        object.__setattr__(self, "bands", _readonly(ab))

    @classmethod
    def from_dense(cls, a, lower_bw: int, upper_bw: int, *, check: bool = True) -> "BandedMatrix":
        a = np.asarray(a, dtype=np.float64)
        n = a.shape[0]
        if a.shape != (n, n):
            raise DimensionError("banded storage needs a square matrix")
        if check:
            i, j = np.nonzero(a)
            if np.any(i - j > lower_bw) or np.any(j - i > upper_bw):
                raise ValueError("matrix has entries outside the requested band")
        ab = np.zeros((lower_bw + upper_bw + 1, n))
        for k in range(-lower_bw, upper_bw + 1):
            ab[upper_bw - k, max(k, 0):n + min(k, 0)] = np.diagonal(a, k)
        return cls(n, lower_bw, upper_bw, ab)

    @property
    def rows(self) -> int:
        return self.order

    @property
    def cols(self) -> int:
        return self.order

    @property
    def shape(self) -> tuple[int, int]:
        return (self.order, self.order)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.bands))

    def diagonal(self, k: int) -> np.ndarray:
        """The k-th diagonal (k > 0 above the main one), length n - |k|."""
        n = self.order
        return self.bands[self.upper_bw - k, max(k, 0):n + min(k, 0)]

    def offsets(self):
        return range(-self.lower_bw, self.upper_bw + 1)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.order, self.order))
        for k in self.offsets():
            if abs(k) < self.order:
                idx = np.arange(self.order - abs(k))
                a[idx + max(-k, 0), idx + max(k, 0)] = self.diagonal(k)
        return a

    def transpose(self) -> "BandedMatrix":
        n = self.order
        ab = np.zeros((self.lower_bw + self.upper_bw + 1, n))
        for k in self.offsets():
            # diagonal k of A is diagonal -k of A^T
            ab[self.lower_bw + k, max(-k, 0):n + min(-k, 0)] = self.diagonal(k)
        return BandedMatrix(n, self.upper_bw, self.lower_bw, ab)

    def __repr__(self):
        return f"BandedMatrix(n={self.order}, bw=({self.lower_bw},{self.upper_bw}))"


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Coordinate-format sparse matrix, sorted row-major, no duplicates.

    Triplets are the canonical form (Matrix Market I/O); a CSR view is
    derived lazily for products.
    """

    rows: int
    cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.row_idx, dtype=np.int64)
        c = np.asarray(self.col_idx, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.float64)
        if not (r.shape == c.shape == v.shape) or r.ndim != 1:
            raise DimensionError("triplet arrays must be 1-D and equally long")
        if r.size and (r.min() < 0 or r.max() >= self.rows or c.min() < 0 or c.max() >= self.cols):
            raise IndexError("triplet index out of range")
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        if r.size > 1:
            dup = (r[1:] == r[:-1]) & (c[1:] == c[:-1])
            if dup.any():
                raise ValueError("duplicate (row, col) entries; use SparseMatrix.from_triplets to merge")
        object.__setattr__(self, "row_idx", _readonly(r.copy()))
        object.__setattr__(self, "col_idx", _readonly(c.copy()))
        object.__setattr__(self, "values", _readonly(v.copy()))

    @classmethod
    def from_triplets(cls, rows: int, cols: int, row_idx, col_idx, values) -> "SparseMatrix":
        """Build from possibly unsorted triplets, summing duplicates in input order."""
        r = np.asarray(row_idx, dtype=np.int64)
        c = np.asarray(col_idx, dtype=np.int64)
        v = np.asarray(values, dtype=np.float64)
        if r.size == 0:
            return cls(rows, cols, r, c, v)
        order = np.lexsort((c, r))  # stable, so duplicates keep input order
        r, c, v = r[order], c[order], v[order]
        start = np.ones(r.size, dtype=bool)
        start[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        if start.all():
            return cls(rows, cols, r, c, v)
        heads = np.flatnonzero(start)
        merged = v[heads].copy()
        for pos in np.flatnonzero(~start):
            merged[np.searchsorted(heads, pos, side="right") - 1] += v[pos]
        return cls(rows, cols, r[heads], c[heads], merged)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], r, c, a[r, c])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def density(self) -> float:
        cells = self.rows * self.cols
        return self.nnz / cells if cells else 0.0

    @cached_property
    def indptr(self) -> np.ndarray:
        ptr = np.zeros(self.rows + 1, dtype=np.int64)
        np.add.at(ptr, self.row_idx + 1, 1)
        return np.cumsum(ptr)

    @cached_property
    def _slot(self) -> np.ndarray:
        # position of each stored entry within its row
        return np.arange(self.nnz) - self.indptr[self.row_idx]

    def to_dense(self) -> np.ndarray:
        a = np.zeros(self.shape)
        a[self.row_idx, self.col_idx] = self.values
        return a

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.cols, self.rows, self.col_idx, self.row_idx, self.values)

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"


Matrix = DenseMatrix | BandedMatrix | SparseMatrix


def as_matrix(m) -> Matrix:
    """Wrap a 2-D array as a DenseMatrix; storage types pass through."""
    if isinstance(m, (DenseMatrix, BandedMatrix, SparseMatrix)):
        return m
    return DenseMatrix(m)


def to_dense(m) -> np.ndarray:
    return as_matrix(m).to_dense()


# -- sequential kernels ------------------------------------------------------

_ROW_BLOCK = 256


def _dense_rowsum(a: np.ndarray, x: np.ndarray | None, absolute: bool) -> np.ndarray:
    out = np.empty(a.shape[0])
    if a.shape[1] == 0:
        out[:] = 0.0
        return out
    for r0 in range(0, a.shape[0], _ROW_BLOCK):
        blk = a[r0:r0 + _ROW_BLOCK]
        if absolute:
            blk = np.abs(blk)
        if x is not None:
            blk = blk * x
        # accumulate is a genuine left-to-right running sum along the row
        out[r0:r0 + _ROW_BLOCK] = np.add.accumulate(blk, axis=1)[:, -1]
    return out


def _banded_rowsum(m: BandedMatrix, x: np.ndarray | None, absolute: bool) -> np.ndarray:
    n = m.order
    acc = np.zeros(n)
    for k in m.offsets():  # increasing column index j = i + k within every row
        if abs(k) >= n:
            continue
        d = m.diagonal(k)
        if absolute:
            d = np.abs(d)
        lo, hi = max(-k, 0), n + min(-k, 0)
        if x is not None:
            d = d * x[max(k, 0):n + min(k, 0)]
        acc[lo:hi] += d
    return acc


def _sparse_rowsum(m: SparseMatrix, x: np.ndarray | None, absolute: bool) -> np.ndarray:
    acc = np.zeros(m.rows)
    if m.nnz == 0:
        return acc
    vals = np.abs(m.values) if absolute else m.values
    terms = vals * x[m.col_idx] if x is not None else vals
    slot = m._slot
    for s in range(int(slot.max()) + 1):
        sel = slot == s
        acc[m.row_idx[sel]] += terms[sel]
    return acc


def _rowsum(m, x, absolute):
    m = as_matrix(m)
    if isinstance(m, DenseMatrix):
        return _dense_rowsum(m.data, x, absolute)
    if isinstance(m, BandedMatrix):
        return _banded_rowsum(m, x, absolute)
    return _sparse_rowsum(m, x, absolute)


def matvec(m, x) -> np.ndarray:
    """``M @ x`` summed left to right along each row."""
    m = as_matrix(m)
    x = as_vector(x)
    if m.shape[1] != x.shape[0]:
        raise DimensionError(f"matvec: matrix has {m.shape[1]} columns, vector has {x.shape[0]} entries")
    return _rowsum(m, x, absolute=False)


def abs_matvec(m, x) -> np.ndarray:
    """``|M| @ |x|``, the componentwise magnitude product."""
    m = as_matrix(m)
    x = as_vector(x)
    if m.shape[1] != x.shape[0]:
        raise DimensionError(f"abs_matvec: matrix has {m.shape[1]} columns, vector has {x.shape[0]} entries")
    return _rowsum(m, np.abs(x), absolute=True)


def seqdot(x, y) -> float:
    """Dot product summed in index order."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"seqdot: lengths {x.shape} and {y.shape} differ")
    if x.size == 0:
        return 0.0
    return float(np.add.accumulate(x * y)[-1])


def row_abs_sums(m) -> np.ndarray:
    return _rowsum(m, None, absolute=True)


def col_abs_sums(m) -> np.ndarray:
    return _rowsum(as_matrix(m).transpose(), None, absolute=True)


def norms(m) -> tuple[float, float, float]:
    """(1-norm, inf-norm, Frobenius norm)."""
    m = as_matrix(m)
    if m.shape[0] == 0 or m.shape[1] == 0:
        raise DimensionError("norms of an empty matrix are undefined")
    n1 = float(col_abs_sums(m).max())
    ninf = float(row_abs_sums(m).max())
    if isinstance(m, DenseMatrix):
        sq = m.data.ravel() ** 2
    elif isinstance(m, BandedMatrix):
        sq = np.concatenate([m.diagonal(k) for k in m.offsets() if abs(k) < m.order]) ** 2
    else:
        sq = m.values ** 2
    fro = float(np.sqrt(np.add.accumulate(sq)[-1])) if sq.size else 0.0
    return n1, ninf, fro


def fast_operator(m):
    """(A @ x, A.T @ x) callables using BLAS/unordered sums, for estimators only."""
    m = as_matrix(m)
    if isinstance(m, DenseMatrix):
        a = m.data
        return (lambda x: a @ x), (lambda x: a.T @ x)
    if isinstance(m, BandedMatrix):
        mt = m.transpose()
        return (lambda x: _banded_rowsum(m, x, False)), (lambda x: _banded_rowsum(mt, x, False))
    r, c, v = m.row_idx, m.col_idx, m.values

    def mv(x):
        return np.bincount(r, weights=v * x[c], minlength=m.rows)

    def rmv(x):
        return np.bincount(c, weights=v * x[r], minlength=m.cols)

    return mv, rmv
