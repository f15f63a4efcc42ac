import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smir.matcore import (
    EPS,
    BandedMatrix,
    DenseMatrix,
    DimensionError,
    SparseMatrix,
    abs_matvec,
    comp_dot,
    comp_matvec,
    comp_residual,
    matvec,
    norms,
    seqdot,
    two_prod,
    two_sum,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def reverse_matvec(a, x):
    """Second implementation for cross-checking: sums each row from the right."""
    out = []
    for row in a:
        s = 0.0
        for j in range(len(row) - 1, -1, -1):
            s += row[j] * x[j]
        out.append(s)
    return np.array(out)


def forward_matvec(a, x):
    out = []
    for row in a:
        s = 0.0
        for j in range(len(row)):
            s += row[j] * x[j]
        out.append(s)
    return np.array(out)


def all_storages(a, p=None, q=None):
    a = np.asarray(a, dtype=float)
    yield DenseMatrix(a)
    yield SparseMatrix.from_dense(a)
    if p is not None and p + q + 1 <= a.shape[0]:
        yield BandedMatrix.from_dense(a, p, q)


class TestMatvec:
    def test_identity(self):
        np.testing.assert_array_equal(matvec(DenseMatrix.identity(3), [1.0, 2.0, 3.0]), [1, 2, 3])

    def test_zero_matrix(self):
        np.testing.assert_array_equal(matvec(DenseMatrix.zeros(2, 2), [5.0, 7.0]), [0, 0])

    def test_two_by_two(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        x = np.ones(2)
        expected = reverse_matvec(a, x)
        np.testing.assert_array_equal(expected, [3.0, 7.0])
        for m in all_storages(a, 1, 1):
            np.testing.assert_array_equal(matvec(m, x), expected)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            matvec(DenseMatrix.identity(3), np.ones(2))

    def test_summation_is_left_to_right(self):
        # 1 + 2^-53 + 2^-53 - 1: left to right gives 0, other orders do not
        a = np.array([[1.0, EPS, EPS, -1.0]])
        x = np.ones(4)
        assert forward_matvec(a, x)[0] == 0.0
        assert reverse_matvec(a, x)[0] != 0.0
        for m in all_storages(a):
            assert matvec(m, x)[0] == 0.0

    def test_banded_matches_forward_order(self):
        rng = np.random.default_rng(3)
        n, p, q = 40, 2, 3
        a = np.triu(np.tril(rng.standard_normal((n, n)), q), -p)
        x = rng.standard_normal(n)
        ref = forward_matvec(a, x)
        for m in all_storages(a, p, q):
            np.testing.assert_array_equal(matvec(m, x), ref)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (5, 4), elements=finite), arrays(np.float64, 4, elements=finite),
           arrays(np.float64, 4, elements=finite))
    def test_linearity(self, a, x, y):
        m = DenseMatrix(a)
        lhs = matvec(m, x + y)
        rhs = matvec(m, x) + matvec(m, y)
        tol = 4 * EPS * norms(m)[1] * (np.abs(x).max() + np.abs(y).max())
        assert np.all(np.abs(lhs - rhs) <= tol + 1e-300)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (4, 4), elements=finite), arrays(np.float64, 4, elements=finite))
    def test_abs_dominates(self, a, x):
        for m in all_storages(np.triu(np.tril(a, 1), -2), 2, 1):
            assert np.all(abs_matvec(m, x) >= np.abs(matvec(m, x)))


class TestAbsMatvec:
    def test_example(self):
        a = np.array([[-1.0, 2.0], [3.0, -4.0]])
        for m in all_storages(a, 1, 1):
            np.testing.assert_array_equal(abs_matvec(m, [-1.0, 1.0]), [3.0, 7.0])

    def test_identity(self):
        x = np.array([-2.0, 0.5, 3.0])
        np.testing.assert_array_equal(abs_matvec(DenseMatrix.identity(3), x), np.abs(x))

    def test_zero(self):
        np.testing.assert_array_equal(abs_matvec(DenseMatrix.zeros(3, 3), np.ones(3)), np.zeros(3))


class TestNorms:
    def test_identity(self):
        assert norms(DenseMatrix.identity(4)) == (1.0, 1.0, 2.0)

    def test_example(self):
        a = np.array([[1.0, -2.0], [3.0, 4.0]])
        for m in all_storages(a, 1, 1):
            n1, ninf, fro = norms(m)
            assert (n1, ninf) == (6.0, 7.0)
            assert fro == math.sqrt(30.0)

    def test_zeros(self):
        assert norms(DenseMatrix.zeros(3, 2)) == (0.0, 0.0, 0.0)

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            norms(DenseMatrix.zeros(0, 0))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (3, 5), elements=finite))
    def test_transpose_swaps_one_and_inf(self, a):
        for m in (DenseMatrix(a), SparseMatrix.from_dense(a)):
            assert norms(m.transpose())[0] == norms(m)[1]


class TestStorage:
    def test_banded_invariants(self):
        with pytest.raises(ValueError):
            BandedMatrix(3, 2, 1, np.zeros((4, 3)))
        with pytest.raises(ValueError):
            BandedMatrix.from_dense(np.ones((3, 3)), 0, 0)

    def test_banded_roundtrip_and_transpose(self):
        a = np.array([[1.0, 2, 0, 0], [3, 4, 5, 0], [0, 6, 7, 8], [0, 0, 9, 10]])
        m = BandedMatrix.from_dense(a, 1, 1)
        np.testing.assert_array_equal(m.to_dense(), a)
        np.testing.assert_array_equal(m.transpose().to_dense(), a.T)
        np.testing.assert_array_equal(m.diagonal(-1), [3, 6, 9])

    def test_sparse_sorted_and_deduplicated(self):
        s = SparseMatrix.from_triplets(3, 3, [2, 0, 2, 1], [1, 2, 1, 0], [1.0, 2.0, 3.0, 4.0])
        assert s.nnz == 3
        np.testing.assert_array_equal(s.row_idx, [0, 1, 2])
        np.testing.assert_array_equal(s.values, [2.0, 4.0, 4.0])
        assert abs(s.density - 3 / 9) < 1 / 9
        with pytest.raises(ValueError):
            SparseMatrix(2, 2, [0, 0], [1, 1], [1.0, 1.0])
        with pytest.raises(IndexError):
            SparseMatrix(2, 2, [0], [2], [1.0])

    def test_immutable(self):
        m = DenseMatrix(np.eye(2))
        with pytest.raises(ValueError):
            m.data[0, 0] = 5.0


class TestCompensated:
    def test_two_sum_and_two_prod_are_exact(self):
        s, e = two_sum(1.0, EPS)
        assert (s, e) == (1.0, EPS)
        a = 1.0 + 2.0 ** -30
        p, e = two_prod(a, a)
        # a^2 = 1 + 2^-29 + 2^-60 exactly
        assert p == 1.0 + 2.0 ** -29 and e == 2.0 ** -60

    def test_comp_dot_cancellation(self):
        x = np.array([1e16, 1.0, -1e16])
        assert seqdot(x, np.ones(3)) == 0.0
        assert comp_dot(x, np.ones(3)) == 1.0

    def test_comp_matvec_storages(self):
        a = np.array([[1e16, 1.0, -1e16], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        for m in all_storages(a, 2, 2):
            np.testing.assert_array_equal(comp_matvec(m, np.ones(3)), [1.0, 1.0, 1.0])

    def test_comp_residual_against_fractions(self):
        from fractions import Fraction

        rng = np.random.default_rng(11)
        n = 6
        a = rng.standard_normal((n, n))
        u, v, b, x = (rng.standard_normal(n) for _ in range(4))
        exact = []
        for i in range(n):
            acc = Fraction(b[i])
            vx = sum(Fraction(v[j]) * Fraction(x[j]) for j in range(n))
            acc -= sum(Fraction(a[i, j]) * Fraction(x[j]) for j in range(n))
            acc -= vx * Fraction(u[i])
            exact.append(float(acc))
        r = comp_residual(DenseMatrix(a), u, v, b, x)
        np.testing.assert_allclose(r, exact, rtol=4 * EPS, atol=0)
