"""Error-free transformations and compensated (twice-working-precision) kernels.

These are used only to build reference quantities: exact-ish residuals,
right-hand sides ``b = B x`` rounded once, and the perturbed-system checks.
They follow the classic TwoSum / TwoProduct (Dekker-Veltkamp split) scheme,
vectorised over whole arrays.
"""
from __future__ import annotations

import numpy as np

from .storage import BandedMatrix, DenseMatrix, SparseMatrix, as_matrix, as_vector, DimensionError

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    """s + e == a + b exactly, with s = fl(a + b)."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    """p + e == a * b exactly (barring over/underflow), with p = fl(a * b)."""
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    e = al * bl - (((p - ah * bh) - al * bh) - ah * bl)
    return p, e


class DDAccumulator:
    """A vector of double-double accumulators (hi, lo), updated in place."""

    def __init__(self, n: int):
        self.hi = np.zeros(n)
        self.lo = np.zeros(n)

    def add(self, x, sl=slice(None)):
        s, e = two_sum(self.hi[sl], x)
        self.hi[sl] = s
        self.lo[sl] += e

    def add_product(self, a, b, sl=slice(None)):
        p, pe = two_prod(a, b)
        s, e = two_sum(self.hi[sl], p)
        self.hi[sl] = s
        self.lo[sl] += e + pe

    def value(self) -> np.ndarray:
        return self.hi + self.lo

    def pair(self) -> tuple[np.ndarray, np.ndarray]:
        s, e = two_sum(self.hi, self.lo)
        return s, e


def _accumulate_matvec(acc: DDAccumulator, m, x, sign: float) -> None:
    m = as_matrix(m)
    x = sign * x
    if isinstance(m, DenseMatrix):
        a = m.data
        for j in range(a.shape[1]):
            acc.add_product(a[:, j], x[j])
    elif isinstance(m, BandedMatrix):
        n = m.order
        for k in m.offsets():
            if abs(k) >= n:
                continue
            lo, hi = max(-k, 0), n + min(-k, 0)
            acc.add_product(m.diagonal(k), x[max(k, 0):n + min(k, 0)], slice(lo, hi))
    elif isinstance(m, SparseMatrix):
        slot = m._slot
        if m.nnz:
            for s in range(int(slot.max()) + 1):
                sel = slot == s
                rows = m.row_idx[sel]
                acc.add_product(m.values[sel], x[m.col_idx[sel]], rows)
    else:  # pragma: no cover - as_matrix guarantees one of the above
        raise TypeError(type(m))


def comp_dot(x, y) -> float:
    """Dot product with a double-double accumulator (Dot2), rounded once."""
    x = as_vector(x)
    y = as_vector(y, x.shape[0])
    hi, lo = _comp_dot_pair(x, y)
    return hi


def comp_matvec(m, x) -> np.ndarray:
    """``M @ x`` evaluated in double-double and rounded once."""
    m = as_matrix(m)
    x = as_vector(x)
    if m.shape[1] != x.shape[0]:
        raise DimensionError("comp_matvec: dimension mismatch")
    acc = DDAccumulator(m.shape[0])
    _accumulate_matvec(acc, m, x, 1.0)
    return acc.value()


def comp_rank1_matvec(a, u, v, x) -> np.ndarray:
    """``(A + u v^T) x`` in double-double, rounded once."""
    a = as_matrix(a)
    x = as_vector(x, a.shape[1])
    u = as_vector(u, a.shape[0])
    v = as_vector(v, a.shape[1])
    acc = DDAccumulator(a.shape[0])
    _accumulate_matvec(acc, a, x, 1.0)
    vx_hi, vx_lo = _comp_dot_pair(v, x)
    acc.add_product(u, vx_hi)
    acc.add_product(u, vx_lo)
    return acc.value()


def comp_residual_pair(a, u, v, b, x, extra: tuple | None = None):
    """``b - A x - (v^T x) u`` in double-double, returned as (hi, lo).

    ``extra`` optionally supplies ``(dB_rows, dB_vec, db)``: a rank-one
    perturbation ``dB = dB_rows dB_vec^T`` of B and a perturbation of b, so
    that the residual of the perturbed system is also computed without
    intermediate rounding.
    """
    a = as_matrix(a)
    n = a.shape[0]
    b = as_vector(b, n)
    x = as_vector(x, a.shape[1])
    acc = DDAccumulator(n)
    acc.add(b.copy())
    _accumulate_matvec(acc, a, x, -1.0)
    vx_hi, vx_lo = _comp_dot_pair(v, x)
    acc.add_product(-np.asarray(u, dtype=np.float64), vx_hi)
    acc.add_product(-np.asarray(u, dtype=np.float64), vx_lo)
    if extra is not None:
        p, q, db = extra
        qx_hi, qx_lo = _comp_dot_pair(q, x)
        acc.add_product(-np.asarray(p, dtype=np.float64), qx_hi)
        acc.add_product(-np.asarray(p, dtype=np.float64), qx_lo)
        acc.add(np.asarray(db, dtype=np.float64).copy())
    return acc.pair()


def comp_residual(a, u, v, b, x) -> np.ndarray:
    """``b - (A + u v^T) x`` computed in double-double and rounded once."""
    hi, lo = comp_residual_pair(a, u, v, b, x)
    return hi + lo


def _comp_dot_pair(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p, pe = two_prod(x, y)
    s = 0.0
    c = 0.0
    for pi, ei in zip(p.tolist(), pe.tolist()):
        t = s + pi
        bb = t - s
        c += (s - (t - bb)) + (pi - bb) + ei
        s = t
    hi = s + c
    lo = c - (hi - s)
    return hi, lo
