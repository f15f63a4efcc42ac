import numpy as np
import pytest

from smir.gallery import randsvd_banded, randsvd_dense, sparse_random
from smir.matcore import (
    DenseMatrix,
    MatrixMarketError,
    SparseMatrix,
    mm_read,
    mm_write,
    read_vector,
    to_dense,
    write_vector,
)


def write(tmp_path, text, name="m.mtx"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_coordinate_identity(tmp_path):
    p = write(tmp_path, "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n")
    m = mm_read(p)
    assert isinstance(m, SparseMatrix)
    assert m.nnz == 2
    np.testing.assert_array_equal(m.to_dense(), np.eye(2))


def test_array_is_column_major(tmp_path):
    p = write(tmp_path, "%%MatrixMarket matrix array real general\n2 2\n1\n3\n2\n4\n")
    m = mm_read(p)
    assert isinstance(m, DenseMatrix)
    np.testing.assert_array_equal(m.data, [[1, 2], [3, 4]])
    out = tmp_path / "again.mtx"
    mm_write(m, out)
    np.testing.assert_array_equal(mm_read(out).data, m.data)


@pytest.mark.parametrize("text,line", [
    ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n", 1),
    ("%%NotMarket matrix coordinate real general\n1 1 1\n1 1 1\n", 1),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 3),
    ("%%MatrixMarket matrix array real general\n2 2\n1\nx\n1\n1\n", 4),
])
def test_parse_errors_carry_line(tmp_path, text, line):
    with pytest.raises(MatrixMarketError) as info:
        mm_read(write(tmp_path, text))
    assert info.value.line == line


@pytest.mark.parametrize("make", [
    lambda: randsvd_banded(30, 1e4, 3, 2, 2, seed=1).A,
    lambda: randsvd_dense(12, 1e3, 2, seed=2).A,
    lambda: sparse_random(60, 0.05, 1e3, seed=3).A,
])
def test_gallery_roundtrip_bitwise(tmp_path, make):
    m = make()
    p = tmp_path / "g.mtx"
    mm_write(m, p, comment="round trip")
    np.testing.assert_array_equal(to_dense(mm_read(p)), to_dense(m))


def test_empty_and_zero_nnz(tmp_path):
    with pytest.raises(ValueError):
        mm_write(DenseMatrix.zeros(0, 0), tmp_path / "z.mtx")
    p = tmp_path / "nnz0.mtx"
    mm_write(SparseMatrix.from_triplets(3, 3, [], [], []), p)
    lines = [ln for ln in p.read_text().splitlines() if not ln.startswith("%")]
    assert lines == ["3 3 0"]
    assert mm_read(p).nnz == 0


def test_vector_roundtrip(tmp_path):
    x = np.array([0.1, -1e-300, 3.0, np.pi])
    write_vector(x, tmp_path / "x.mtx")
    np.testing.assert_array_equal(read_vector(tmp_path / "x.mtx"), x)
