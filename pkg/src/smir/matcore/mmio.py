"""Matrix Market reader/writer (real, general; coordinate and array formats).

Values are written with ``repr`` so every float round-trips bit-exactly.
"""
from __future__ import annotations

import os

import numpy as np

from .storage import BandedMatrix, DenseMatrix, SparseMatrix, as_matrix


class MatrixMarketError(ValueError):
    """Malformed Matrix Market content; ``line`` is 1-based (0 if not tied to a line)."""

    def __init__(self, message: str, line: int = 0, path=None):
        self.line = line
        self.path = path
        where = f"{path}:" if path else ""
        super().__init__(f"{where}{line}: {message}" if line else f"{where}{message}")


_FIELDS = ("real", "integer", "double")


def _parse_header(line: str, path):
    tokens = line.strip().split()
    if len(tokens) != 5 or tokens[0] != "%%MatrixMarket":
        raise MatrixMarketError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1, path)
    obj, fmt, field, symm = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}", 1, path)
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unsupported format {fmt!r}", 1, path)
    if field not in _FIELDS:
        raise MatrixMarketError(f"unsupported field {field!r} (only real/integer)", 1, path)
    if symm != "general":
        raise MatrixMarketError(f"unsupported symmetry {symm!r} (only general)", 1, path)
    return fmt


def _data_lines(lines, start):
    for lineno, raw in enumerate(lines[start:], start=start + 1):
        s = raw.strip()
        if not s or s.startswith("%"):
            continue
        yield lineno, s.split()


def _float(tok, lineno, path):
    try:
        val = float(tok)
    except ValueError:
        raise MatrixMarketError(f"cannot parse value {tok!r}", lineno, path) from None
    return val


def _int(tok, lineno, path):
    try:
        return int(tok)
    except ValueError:
        raise MatrixMarketError(f"cannot parse integer {tok!r}", lineno, path) from None


def mm_read(path) -> DenseMatrix | SparseMatrix:
    """Read a Matrix Market file; coordinate gives SparseMatrix, array gives DenseMatrix."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1, path)
    fmt = _parse_header(lines[0], path)
    body = _data_lines(lines, 1)
    try:
        lineno, size = next(body)
    except StopIteration:
        raise MatrixMarketError("missing size line", len(lines), path) from None
    if fmt == "coordinate":
        if len(size) != 3:
            raise MatrixMarketError("coordinate size line needs 'rows cols nnz'", lineno, path)
        m, n, nnz = (_int(t, lineno, path) for t in size)
        if m < 0 or n < 0 or nnz < 0:
            raise MatrixMarketError("negative dimension", lineno, path)
        ri = np.empty(nnz, dtype=np.int64)
        ci = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        k = 0
        for lineno, tok in body:
            if k >= nnz:
                raise MatrixMarketError(f"more than the declared {nnz} entries", lineno, path)
            if len(tok) != 3:
                raise MatrixMarketError("coordinate entry needs 'row col value'", lineno, path)
            i, j = _int(tok[0], lineno, path), _int(tok[1], lineno, path)
            if not (1 <= i <= m and 1 <= j <= n):
                raise MatrixMarketError(f"index ({i}, {j}) out of range for {m}x{n}", lineno, path)
            ri[k], ci[k], vals[k] = i - 1, j - 1, _float(tok[2], lineno, path)
            k += 1
        if k != nnz:
            raise MatrixMarketError(f"expected {nnz} entries, found {k}", len(lines), path)
        try:
            return SparseMatrix(m, n, ri, ci, vals)
        except ValueError as exc:
            raise MatrixMarketError(str(exc), 0, path) from None
    if len(size) != 2:
        raise MatrixMarketError("array size line needs 'rows cols'", lineno, path)
    m, n = (_int(t, lineno, path) for t in size)
    if m < 0 or n < 0:
        raise MatrixMarketError("negative dimension", lineno, path)
    vals = []
    for lineno, tok in body:
        if len(tok) != 1:
            raise MatrixMarketError("array entry must be a single value", lineno, path)
        if len(vals) >= m * n:
            raise MatrixMarketError(f"more than the declared {m * n} values", lineno, path)
        vals.append(_float(tok[0], lineno, path))
    if len(vals) != m * n:
        raise MatrixMarketError(f"expected {m * n} values, found {len(vals)}", len(lines), path)
    # array format is column-major
    return DenseMatrix(np.array(vals, dtype=np.float64).reshape((n, m)).T)


def mm_write(m, path, comment: str | None = None) -> None:
    """Write a matrix; sparse/banded as coordinate, dense as array."""
    m = as_matrix(m)
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        raise ValueError("refusing to write an empty (0-dimension) matrix")
    out = []
    if isinstance(m, DenseMatrix):
        out.append("%%MatrixMarket matrix array real general")
        if comment:
            out.extend("% " + c for c in comment.splitlines())
        out.append(f"{rows} {cols}")
        out.extend(repr(float(v)) for v in m.data.T.ravel())
    else:
        if isinstance(m, BandedMatrix):
            m = SparseMatrix.from_dense(m.to_dense())
        out.append("%%MatrixMarket matrix coordinate real general")
        if comment:
            out.extend("% " + c for c in comment.splitlines())
        out.append(f"{rows} {cols} {m.nnz}")
        out.extend(f"{i + 1} {j + 1} {float(v)!r}"
                   for i, j, v in zip(m.row_idx.tolist(), m.col_idx.tolist(), m.values.tolist()))
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    os.replace(tmp, path)


def read_vector(path) -> np.ndarray:
    """Read an n×1 (or 1×n) Matrix Market file as a 1-D array."""
    a = mm_read(path).to_dense()
    if 1 not in a.shape:
        raise MatrixMarketError(f"expected a vector, got a {a.shape[0]}x{a.shape[1]} matrix", 0, path)
    return a.ravel()


def write_vector(x, path, comment: str | None = None) -> None:
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    mm_write(DenseMatrix(x), path, comment)
