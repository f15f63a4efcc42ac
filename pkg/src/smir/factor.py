"""Factorizations of A: dense and banded PLU with partial pivoting, Householder QR,
plus power/inverse-iteration estimates of the extreme singular values.

Every factorization exposes ``solve(b)`` and ``solve_transpose(b)`` so the
solvers can treat them interchangeably.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .matcore import EPS, BandedMatrix, DenseMatrix, SparseMatrix, as_matrix, as_vector, fast_operator, norms
from .matcore.storage import DimensionError


class ExactlySingular(ArithmeticError):
    """A pivot was exactly zero after the column search."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"matrix is exactly singular (zero pivot at step {step})")


class NearSingularWarning(RuntimeWarning):
    """Smallest pivot is below n * eps * ||A||_inf; solves still proceed."""


def _check_rhs(order: int, b) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != order:
        raise DimensionError(f"right-hand side has shape {b.shape}, expected ({order},)")
    return b


def _flag_near_singular(min_pivot: float, order: int, norm_inf: float) -> bool:
    near = min_pivot < order * EPS * norm_inf
    if near:
        warnings.warn(
            f"smallest pivot {min_pivot:.3e} is below n*eps*||A||_inf = {order * EPS * norm_inf:.3e}",
            NearSingularWarning,
            stacklevel=3,
        )
    return near


# -- dense PLU ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PluFactorization:
    """P A = L U with L unit lower triangular, packed together with U in ``lu``.

    ``pivots`` is the row permutation: row i of P A is row ``pivots[i]`` of A.
    """

    lu: np.ndarray
    pivots: np.ndarray
    sign: int
    near_singular: bool = False

    @property
    def order(self) -> int:
        return self.lu.shape[0]

    @property
    def L(self) -> np.ndarray:
        return np.tril(self.lu, -1) + np.eye(self.order)

    @property
    def U(self) -> np.ndarray:
        return np.triu(self.lu)

    @property
    def min_pivot(self) -> float:
        return float(np.abs(np.diagonal(self.lu)).min()) if self.order else 0.0

    def solve(self, b) -> np.ndarray:
        b = _check_rhs(self.order, b)
        y = solve_triangular(self.lu, b[self.pivots], lower=True, unit_diagonal=True, check_finite=False)
        return solve_triangular(self.lu, y, lower=False, check_finite=False)

    def solve_transpose(self, c) -> np.ndarray:
        c = _check_rhs(self.order, c)
        w = solve_triangular(self.lu, c, lower=False, trans="T", check_finite=False)
        t = solve_triangular(self.lu, w, lower=True, unit_diagonal=True, trans="T", check_finite=False)
        x = np.empty_like(t)
        x[self.pivots] = t
        return x


_NB = 64


def _panel(a: np.ndarray, k0: int, k1: int, perm: np.ndarray) -> int:
    """Unblocked elimination of columns k0:k1; returns the number of row swaps."""
    swaps = 0
    for k in range(k0, k1):
        p = k + int(np.argmax(np.abs(a[k:, k])))  # argmax returns the first maximum
        if a[p, k] == 0.0:
            raise ExactlySingular(k)
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            swaps += 1
        a[k + 1:, k] /= a[k, k]
        if k + 1 < k1:
            a[k + 1:, k + 1:k1] -= np.outer(a[k + 1:, k], a[k, k + 1:k1])
    return swaps


def plu_factor(a) -> PluFactorization:
    """Blocked right-looking Gaussian elimination with partial pivoting.

    Ties in the pivot search go to the lowest row index.  Raises
    :class:`ExactlySingular` on a zero pivot; emits
    :class:`NearSingularWarning` (and sets ``near_singular``) when the
    smallest pivot is below ``n * eps * ||A||_inf``.
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"plu_factor needs a square matrix, got {m.shape}")
    lu = m.to_dense()
    n = lu.shape[0]
    norm_inf = float(np.abs(lu).sum(axis=1).max()) if n else 0.0
    perm = np.arange(n)
    swaps = 0
    for k0 in range(0, n, _NB):
        k1 = min(k0 + _NB, n)
        swaps += _panel(lu, k0, k1, perm)
        if k1 < n:
            l11 = lu[k0:k1, k0:k1]
            a12 = lu[k0:k1, k1:]
            for i in range(1, k1 - k0):  # unit lower triangular forward solve, row by row
                a12[i] -= l11[i, :i] @ a12[:i]
            lu[k1:, k1:] -= lu[k1:, k0:k1] @ a12
    near = _flag_near_singular(float(np.abs(np.diagonal(lu)).min()), n, norm_inf) if n else False
    lu.setflags(write=False)
    perm.setflags(write=False)
    return PluFactorization(lu, perm, -1 if swaps % 2 else 1, near)


def plu_solve(f, b) -> np.ndarray:
    return f.solve(b)


# -- banded PLU ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BandedPluFactorization:
    """Band LU with partial pivoting in row-compact storage.

    Row i of ``work`` holds columns ``i - lower_bw .. i + lower_bw + upper_bw``
    at offsets ``j - i + lower_bw``.  After factorization the slots right of
    the diagonal hold U (upper bandwidth ``lower_bw + upper_bw`` after
    fill), and the slot for column k in row k + a holds the multiplier of
    elimination step k.  ``ipiv[k]`` is the row swapped with row k at step k,
    applied before that step's elimination, as in LAPACK's gbtrf.
    """

    order: int
    lower_bw: int
    upper_bw: int
    work: np.ndarray
    ipiv: np.ndarray
    near_singular: bool = False

    @property
    def fill_upper_bw(self) -> int:
        return self.lower_bw + self.upper_bw

    @property
    def min_pivot(self) -> float:
        return float(np.abs(self.work[:, self.lower_bw]).min()) if self.order else 0.0

    @property
    def U(self) -> np.ndarray:
        n, p = self.order, self.lower_bw
        u = np.zeros((n, n))
        for s in range(self.fill_upper_bw + 1):
            idx = np.arange(n - s)
            u[idx, idx + s] = self.work[idx, p + s]
        return u

    def _forward(self, y: np.ndarray) -> None:
        n, p = self.order, self.lower_bw
        w, ipiv = self.work, self.ipiv
        for k in range(n):
            q = ipiv[k]
            if q != k:
                y[k], y[q] = y[q], y[k]
            a_max = min(p, n - 1 - k)
            if a_max:
                a = np.arange(1, a_max + 1)
                y[k + 1:k + 1 + a_max] -= w[k + a, p - a] * y[k]

    def _backward(self, y: np.ndarray) -> None:
        n, p, s_max = self.order, self.lower_bw, self.fill_upper_bw
        w = self.work
        for i in range(n - 1, -1, -1):
            m = min(s_max, n - 1 - i)
            acc = y[i]
            if m:
                acc -= w[i, p + 1:p + 1 + m] @ y[i + 1:i + 1 + m]
            y[i] = acc / w[i, p]

    def solve(self, b) -> np.ndarray:
        y = _check_rhs(self.order, b).copy()
        self._forward(y)
        self._backward(y)
        return y

    def solve_transpose(self, c) -> np.ndarray:
        n, p, s_max = self.order, self.lower_bw, self.fill_upper_bw
        w, ipiv = self.work, self.ipiv
        y = _check_rhs(self.order, c).copy()
        # U^T y = c, forward
        for i in range(n):
            m = min(s_max, i)
            acc = y[i]
            if m:
                s = np.arange(m, 0, -1)
                acc -= w[i - s, p + s] @ y[i - m:i]
            y[i] = acc / w[i, p]
        # apply the transposed elimination steps in reverse order
        for k in range(n - 1, -1, -1):
            a_max = min(p, n - 1 - k)
            if a_max:
                a = np.arange(1, a_max + 1)
                y[k] -= w[k + a, p - a] @ y[k + 1:k + 1 + a_max]
            q = ipiv[k]
            if q != k:
                y[k], y[q] = y[q], y[k]
        return y


def banded_plu_factor(a: BandedMatrix) -> BandedPluFactorization:
    """Partial-pivoting LU that stays inside the band (plus pivoting fill)."""
    if not isinstance(a, BandedMatrix):
        raise TypeError("banded_plu_factor needs a BandedMatrix")
    n, p, q = a.order, a.lower_bw, a.upper_bw
    width = 2 * p + q + 1
    w = np.zeros((n, width))
    for k in a.offsets():
        d = a.diagonal(k)
        rows = np.arange(max(-k, 0), n + min(-k, 0))
        w[rows, k + p] = d
    norm_inf = float(np.abs(w).sum(axis=1).max()) if n else 0.0
    ipiv = np.arange(n)
    ncols = p + q + 1  # columns k .. k+p+q touched at step k
    for k in range(n):
        nr = min(p, n - 1 - k) + 1
        nc = min(ncols, n - k)
        ra = np.arange(nr)[:, None]
        cs = np.arange(nc)[None, :]
        blk = w[k + ra, p - ra + cs]
        piv = int(np.argmax(np.abs(blk[:, 0])))
        if blk[piv, 0] == 0.0:
            raise ExactlySingular(k)
        if piv:
            blk[[0, piv]] = blk[[piv, 0]]
            ipiv[k] = k + piv
        if nr > 1:
            mult = blk[1:, 0] / blk[0, 0]
            blk[1:, 1:] -= np.outer(mult, blk[0, 1:])
            blk[1:, 0] = mult
        w[k + ra, p - ra + cs] = blk
    near = _flag_near_singular(float(np.abs(w[:, p]).min()), n, norm_inf) if n else False
    w.setflags(write=False)
    ipiv.setflags(write=False)
    return BandedPluFactorization(n, p, q, w, ipiv, near)


# -- Householder QR -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QrFactorization:
    """A = Q R with Q = H_0 H_1 ... H_{n-1}, H_k = I - tau_k v_k v_k^T.

    ``qr`` holds R on and above the diagonal and the essential parts of the
    v_k (v_k[k] = 1 implicit) below it.  R has a nonnegative diagonal.
    """

    qr: np.ndarray
    tau: np.ndarray

    @property
    def order(self) -> int:
        return self.qr.shape[0]

    @property
    def R(self) -> np.ndarray:
        return np.triu(self.qr)

    def _reflector(self, k: int) -> np.ndarray:
        v = self.qr[k:, k].copy()
        v[0] = 1.0
        return v

    def apply_qt(self, b) -> np.ndarray:
        y = np.array(b, dtype=np.float64)
        for k in range(self.order):
            if self.tau[k]:
                v = self._reflector(k)
                y[k:] -= self.tau[k] * (v @ y[k:]) * v
        return y

    def apply_q(self, b) -> np.ndarray:
        y = np.array(b, dtype=np.float64)
        for k in range(self.order - 1, -1, -1):
            if self.tau[k]:
                v = self._reflector(k)
                y[k:] -= self.tau[k] * (v @ y[k:]) * v
        return y

    @property
    def Q(self) -> np.ndarray:
        n = self.order
        q = np.eye(n)
        for j in range(n):
            q[:, j] = self.apply_q(q[:, j])
        return q

    def solve(self, b) -> np.ndarray:
        b = _check_rhs(self.order, b)
        return solve_triangular(self.qr, self.apply_qt(b), lower=False, check_finite=False)

    def solve_transpose(self, c) -> np.ndarray:
        c = _check_rhs(self.order, c)
        w = solve_triangular(self.qr, c, lower=False, trans="T", check_finite=False)
        return self.apply_q(w)


def _householder(x: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Return (v, tau, beta) with (I - tau v v^T) x = beta e_1, v[0] = 1, beta >= 0."""
    x0 = float(x[0])
    tail = x[1:]
    sigma = float(tail @ tail)
    v = np.empty_like(x)
    v[0] = 1.0
    if sigma == 0.0:
        v[1:] = 0.0
        if x0 >= 0.0:
            return v, 0.0, x0
        return v, 2.0, -x0
    mu = np.sqrt(x0 * x0 + sigma)
    # Parlett's formula avoids cancellation in x0 - mu when x0 > 0
    v0 = x0 - mu if x0 <= 0.0 else -sigma / (x0 + mu)
    tau = 2.0 * v0 * v0 / (sigma + v0 * v0)
    v[1:] = tail / v0
    return v, tau, mu


def qr_factor(a) -> QrFactorization:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"qr_factor needs a square matrix, got {m.shape}")
    r = m.to_dense()
    n = r.shape[0]
    tau = np.zeros(n)
    for k in range(n):
        v, t, beta = _householder(r[k:, k])
        if t:
            r[k:, k + 1:] -= t * np.outer(v, v @ r[k:, k + 1:])
        r[k, k] = beta
        r[k + 1:, k] = v[1:]
        tau[k] = t
    if n and float(np.abs(np.diagonal(r)).min()) == 0.0:
        raise ExactlySingular(int(np.argmin(np.abs(np.diagonal(r)))))
    r.setflags(write=False)
    tau.setflags(write=False)
    return QrFactorization(r, tau)


def qr_solve(f: QrFactorization, b) -> np.ndarray:
    return f.solve(b)


# -- dispatch -----------------------------------------------------------------

def detect_bandwidth(m) -> tuple[int, int]:
    m = as_matrix(m)
    if isinstance(m, BandedMatrix):
        return m.lower_bw, m.upper_bw
    if isinstance(m, SparseMatrix):
        r, c = m.row_idx, m.col_idx
    else:
        r, c = np.nonzero(m.data)
    if r.size == 0:
        return 0, 0
    d = c - r
    return int(max(0, -d.min())), int(max(0, d.max()))


def factor(a, method: str = "lu"):
    """Factor A with the storage-appropriate kernel.

    ``method`` is ``"lu"`` or ``"qr"``.  Banded matrices (and sparse ones whose
    band is narrow) use the banded PLU; everything else is densified.
    """
    m = as_matrix(a)
    if method == "qr":
        return qr_factor(m)
    if method != "lu":
        raise ValueError(f"unknown factorization method {method!r}")
    if isinstance(m, SparseMatrix):
        p, q = detect_bandwidth(m)
        if m.rows == m.cols and p + q + 1 <= max(1, m.rows // 4):
            m = BandedMatrix.from_dense(m.to_dense(), p, q, check=False)
    if isinstance(m, BandedMatrix):
        return banded_plu_factor(m)
    return plu_factor(m)


# -- singular value estimation ------------------------------------------------

class SigmaEstimate(NamedTuple):
    sigma_max: float
    sigma_min: float
    converged: bool
    near_singular: bool = False

    @property
    def kappa(self) -> float:
        return self.sigma_max / self.sigma_min if self.sigma_min > 0 else np.inf


def _start_vector(n: int) -> np.ndarray:
    x = np.random.default_rng(20240229).standard_normal(n)
    return x / np.linalg.norm(x)


def sigma_extremes(a, f, tol: float = 1e-4, maxiter: int = 200) -> SigmaEstimate:
    """Estimate sigma_max(A) by power iteration and sigma_min(A) by inverse
    iteration on A^T A, reusing the factorization ``f`` of A.

    Both stop when the relative change of the estimate drops below ``tol`` or
    after ``maxiter`` iterations; ``converged`` is True only if both stopped
    on the tolerance.  When ``f`` flags near-singularity sigma_min is
    reported as 0.
    """
    m = as_matrix(a)
    n = m.shape[0]
    if n == 0:
        raise DimensionError("sigma_extremes of an empty matrix")
    mv, rmv = fast_operator(m)

    x = _start_vector(n)
    smax, ok_max = 0.0, False
    for _ in range(maxiter):
        y = rmv(mv(x))
        lam = float(x @ y)
        est = np.sqrt(max(lam, 0.0))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            smax, ok_max = 0.0, True
            break
        x = y / ny
        if smax and abs(est - smax) <= tol * est:
            smax, ok_max = est, True
            break
        smax = est

    near = bool(getattr(f, "near_singular", False))
    if near:
        return SigmaEstimate(smax, 0.0, ok_max, True)
    x = _start_vector(n)
    smin, ok_min = 0.0, False
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(maxiter):
            z = f.solve(f.solve_transpose(x))
            lam = float(x @ z)
            nz = np.linalg.norm(z)
            if not np.isfinite(nz) or nz == 0.0 or lam <= 0.0:
                return SigmaEstimate(smax, 0.0, False, True)
            est = 1.0 / np.sqrt(lam)
            x = z / nz
            if smin and abs(est - smin) <= tol * est:
                smin, ok_min = est, True
                break
            smin = est
    return SigmaEstimate(smax, smin, ok_max and ok_min, False)


def norm_inf(a) -> float:
    return norms(a)[1]
