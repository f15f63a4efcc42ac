"""Solvers for (A + u v^T) x = b that reuse a factorization of A.

* :func:`sm_solve`: the Sherman-Morrison formula, evaluated step by step so
  every intermediate quantity is kept in an :class:`SmTrace`.
* :func:`sm_ir_solve`: the same, followed by fixed-precision iterative
  refinement where each correction is again an SM solve that reuses the
  factorization, z_hat and beta of the base solve.
* :func:`bec_solve`: block elimination of the bordered (n+1)-system.
* :func:`gepp_on_b`: the baseline, Gaussian elimination on the dense sum B.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import factor as _factor
from .factor import QrFactorization
from .matcore import (
    EPS,
    BandedMatrix,
    DenseMatrix,
    DimensionError,
    SparseMatrix,
    as_matrix,
    as_vector,
    comp_residual,
    matvec,
    norms,
    seqdot,
)

METHODS = ("SM-LU", "SM-QR", "SM-LU-IR", "BEC", "GEPP-on-B")


class SmBreakdown(ArithmeticError):
    """1 + v^T A^{-1} u is numerically zero: B is singular relative to A."""

    def __init__(self, beta: float, threshold: float):
        self.beta = beta
        self.threshold = threshold
        super().__init__(f"|beta| = {abs(beta):.3e} <= breakdown threshold {threshold:.3e}")


# -- the system ---------------------------------------------------------------

class RankOneSystem:
    """(A + u v^T) x = b with cached norms of A and B."""

    def __init__(self, a, u, v, b):
        self.A = as_matrix(a)
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise DimensionError(f"A must be square, got {self.A.shape}")
        self.u = as_vector(u, n).copy()
        self.v = as_vector(v, n).copy()
        self.b = as_vector(b, n).copy()
        for arr in (self.u, self.v, self.b):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @cached_property
    def norm_A_inf(self) -> float:
        return norms(self.A)[1]

    @cached_property
    def norm_B_inf(self) -> float:
        return float(self.abs_B_rowsums().max())

    @cached_property
    def norm_b_inf(self) -> float:
        return float(np.abs(self.b).max()) if self.n else 0.0

    def dense_B(self) -> np.ndarray:
        return self.A.to_dense() + np.outer(self.u, self.v)

    def _pattern(self):
        """(rows, cols, values) of the stored entries of a banded/sparse A."""
        m = self.A
        if isinstance(m, SparseMatrix):
            return m.row_idx, m.col_idx, m.values
        rows, cols, vals = [], [], []
        n = m.order
        for k in m.offsets():
            if abs(k) >= n:
                continue
            i = np.arange(max(-k, 0), n + min(-k, 0))
            rows.append(i)
            cols.append(i + k)
            vals.append(m.diagonal(k))
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    def abs_B_matvec(self, x) -> np.ndarray:
        """|A + u v^T| |x| without forming B for banded or sparse A.

        Outside the stored pattern of A, |b_ij| = |u_i||v_j|, so row i gets
        |u_i| * (sum_j |v_j x_j| - sum_{j in pattern(i)} |v_j x_j|).
        """
        x = np.abs(as_vector(x, self.n))
        u, v = self.u, self.v
        if isinstance(self.A, DenseMatrix):
            out = np.empty(self.n)
            a = self.A.data
            for r0 in range(0, self.n, 256):
                blk = np.abs(a[r0:r0 + 256] + np.outer(u[r0:r0 + 256], v)) * x
                out[r0:r0 + 256] = np.add.accumulate(blk, axis=1)[:, -1] if self.n else 0.0
            return out
        r, c, val = self._pattern()
        vx = np.abs(v) * x
        total = seqdot(np.ones(self.n), vx)
        inside = np.bincount(r, weights=np.abs(val + u[r] * v[c]) * x[c], minlength=self.n)
        covered = np.bincount(r, weights=vx[c], minlength=self.n)
        return inside + np.abs(u) * np.maximum(total - covered, 0.0)

    def abs_B_rowsums(self) -> np.ndarray:
        return self.abs_B_matvec(np.ones(self.n))

    def scaled(self, s: float) -> "RankOneSystem":
        """The system with A, u, b multiplied by s (so B scales by s)."""
        m = self.A
        if isinstance(m, DenseMatrix):
            a = DenseMatrix(s * m.data)
        elif isinstance(m, BandedMatrix):
            a = BandedMatrix(m.order, m.lower_bw, m.upper_bw, s * m.bands)
        else:
            a = SparseMatrix(m.rows, m.cols, m.row_idx, m.col_idx, s * m.values)
        return RankOneSystem(a, s * self.u, self.v, s * self.b)

    def __repr__(self):
        return f"RankOneSystem(n={self.n}, A={self.A!r})"


def residual(sys: RankOneSystem, x_hat) -> np.ndarray:
    """r = b - A x - (v^T x) u in working precision, in that order."""
    x_hat = as_vector(x_hat, sys.n)
    ax = matvec(sys.A, x_hat)
    vx = seqdot(sys.v, x_hat)
    return (sys.b - ax) - vx * sys.u


def _normwise(sys: RankOneSystem, x: np.ndarray, r: np.ndarray) -> float:
    num = float(np.abs(r).max()) if r.size else 0.0
    den = sys.norm_B_inf * (float(np.abs(x).max()) if x.size else 0.0) + sys.norm_b_inf
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / den


def _componentwise(sys: RankOneSystem, x: np.ndarray, r: np.ndarray) -> float:
    num = np.abs(r)
    den = sys.abs_B_matvec(x) + np.abs(sys.b)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return float(q.max()) if q.size else 0.0


# -- traces and reports ---------------------------------------------------------

@dataclass(frozen=True)
class SmTrace:
    """Every intermediate of one SM evaluation."""

    y_hat: np.ndarray
    z_hat: np.ndarray
    alpha: float
    beta: float
    theta: float
    w_hat: np.ndarray
    x_hat: np.ndarray
    vz: float
    breakdown_flag: bool = False


@dataclass(frozen=True)
class IrStep:
    r_hat: np.ndarray        # residual of the iterate this step corrects
    y_r: np.ndarray
    alpha_r: float
    theta_r: float
    w: np.ndarray            # the new iterate
    residual_norm: float     # of the new iterate
    normwise_berr: float
    componentwise_berr: float


@dataclass
class IrTrace:
    steps: list[IrStep] = field(default_factory=list)
    initial_normwise_berr: float = np.nan
    initial_componentwise_berr: float = np.nan
    initial_residual_norm: float = np.nan
    converged: bool = False
    diverged: bool = False
    criterion: str = "normwise"
    tol: float = 5 * EPS
    max_ir: int = 20

    @property
    def step_count(self) -> int:
        return len(self.steps)

    def berr_history(self, kind: str = "normwise") -> list[float]:
        first = self.initial_normwise_berr if kind == "normwise" else self.initial_componentwise_berr
        attr = "normwise_berr" if kind == "normwise" else "componentwise_berr"
        return [first] + [getattr(s, attr) for s in self.steps]

    def residual_history(self) -> list[float]:
        return [self.initial_residual_norm] + [s.residual_norm for s in self.steps]


@dataclass
class SolveReport:
    solution: np.ndarray
    method: str
    sm_trace: SmTrace | None = None
    ir_trace: IrTrace | None = None
    zeta: float | None = None
    timings: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)


# -- solvers ------------------------------------------------------------------

def breakdown_threshold(n: int, v, z_hat) -> float:
    return 10.0 * n * EPS * (1.0 + seqdot(np.abs(v), np.abs(z_hat)))


def _method_tag(f) -> str:
    return "SM-QR" if isinstance(f, QrFactorization) else "SM-LU"


def _sm_core(sys: RankOneSystem, f, rhs: np.ndarray, z_hat: np.ndarray, beta: float):
    y = f.solve(rhs)
    alpha = seqdot(sys.v, y)
    theta = alpha / beta
    w = theta * z_hat
    return y, alpha, theta, w, y - w


def sm_solve(sys: RankOneSystem, f) -> SolveReport:
    """Sherman-Morrison solve following the fixed seven-step sequence:
    y = A\\b, z = A\\u, alpha = v.y, beta = 1 + v.z, theta = alpha/beta,
    w = theta*z, x = y - w.  Dot products are summed in index order.
    """
    if f.order != sys.n:
        raise DimensionError("factorization order does not match the system")
    t0 = time.perf_counter()
    z = f.solve(sys.u)
    vz = seqdot(sys.v, z)
    beta = 1.0 + vz
    thresh = breakdown_threshold(sys.n, sys.v, z)
    if abs(beta) <= thresh:
        raise SmBreakdown(beta, thresh)
    y, alpha, theta, w, x = _sm_core(sys, f, sys.b, z, beta)
    trace = SmTrace(y, z, alpha, beta, theta, w, x, vz)
    return SolveReport(x, _method_tag(f), sm_trace=trace, timings={"solve": time.perf_counter() - t0})


def sm_ir_solve(sys: RankOneSystem, f, tol: float = 5 * EPS, max_ir: int = 20,
                criterion: str = "normwise", residual_mode: str = "working",
                base: SolveReport | None = None) -> SolveReport:
    """SM followed by fixed-precision iterative refinement.

    Each step computes r = b - A x - (v^T x) u, solves A y_r = r with the
    existing factorization, sets theta_r = (v^T y_r) / beta with the beta of
    the base solve, and updates x <- x + (y_r - theta_r z_hat).  Stops when
    the chosen backward error (``criterion`` is "normwise" or
    "componentwise") drops below ``tol``, after ``max_ir`` steps, or after
    three consecutive increases (``diverged``).

    ``residual_mode="compensated"`` evaluates residuals in double-double;
    it exists for oracle experiments only.
    """
    if criterion not in ("normwise", "componentwise"):
        raise ValueError(f"unknown stopping criterion {criterion!r}")
    if residual_mode not in ("working", "compensated"):
        raise ValueError(f"unknown residual mode {residual_mode!r}")
    if max_ir < 0:
        raise ValueError("max_ir must be nonnegative")
    rep = base if base is not None else sm_solve(sys, f)
    tr = rep.sm_trace
    t0 = time.perf_counter()

    def resid(x):
        if residual_mode == "working":
            return residual(sys, x)
        return comp_residual(sys.A, sys.u, sys.v, sys.b, x)

    def measure(x, r):
        nw = _normwise(sys, x, r)
        cw = _componentwise(sys, x, r)
        return nw, cw, (nw if criterion == "normwise" else cw)

    x = tr.x_hat
    r = resid(x)
    nw, cw, crit = measure(x, r)
    ir = IrTrace(initial_normwise_berr=nw, initial_componentwise_berr=cw,
                 initial_residual_norm=float(np.abs(r).max()), criterion=criterion, tol=tol, max_ir=max_ir)
    ir.converged = crit < tol
    rises = 0
    while not ir.converged and ir.step_count < max_ir:
        y_r, alpha_r, theta_r, _, d = _sm_core(sys, f, r, tr.z_hat, tr.beta)
        w = x + d
        r_new = resid(w)
        nw, cw, new_crit = measure(w, r_new)
        ir.steps.append(IrStep(r, y_r, alpha_r, theta_r, w, float(np.abs(r_new).max()), nw, cw))
        rises = rises + 1 if new_crit > crit else 0
        x, r, crit = w, r_new, new_crit
        ir.converged = crit < tol
        if rises >= 3:
            ir.diverged = True
            break
    timings = dict(rep.timings)
    timings["refine"] = time.perf_counter() - t0
    return SolveReport(x, "SM-QR-IR" if rep.method == "SM-QR" else "SM-LU-IR",
                       sm_trace=tr, ir_trace=ir, timings=timings)


def bec_solve(sys: RankOneSystem, f) -> SolveReport:
    """Block elimination of [[A, u], [v^T, -1]] [x; zeta] = [b; 0].

    With the factors [[A, 0], [v^T, delta]] [[I, A^{-1}u], [0, 1]] and
    delta = -1 - v^T A^{-1} u: forward substitution gives y = A\\b and
    pi = -(v^T y)/delta, back substitution gives zeta = pi, x = y - zeta z.
    """
    if f.order != sys.n:
        raise DimensionError("factorization order does not match the system")
    t0 = time.perf_counter()
    z = f.solve(sys.u)
    vz = seqdot(sys.v, z)
    delta = -1.0 - vz
    thresh = breakdown_threshold(sys.n, sys.v, z)
    if abs(delta) <= thresh:
        raise SmBreakdown(-delta, thresh)
    y = f.solve(sys.b)
    vy = seqdot(sys.v, y)
    zeta = -vy / delta
    x = y - zeta * z
    trace = SmTrace(y, z, vy, -delta, zeta, zeta * z, x, vz)
    return SolveReport(x, "BEC", sm_trace=trace, zeta=zeta, timings={"solve": time.perf_counter() - t0})


def gepp_on_b(sys: RankOneSystem) -> SolveReport:
    """Form B = A + u v^T densely and solve it with partial-pivoting LU."""
    t0 = time.perf_counter()
    fb = _factor.plu_factor(sys.dense_B())
    t1 = time.perf_counter()
    x = fb.solve(sys.b)
    t2 = time.perf_counter()
    return SolveReport(x, "GEPP-on-B", timings={"factor": t1 - t0, "solve": t2 - t1})


def solve(sys: RankOneSystem, method: str, f=None, **ir_options) -> SolveReport:
    """Run one of :data:`METHODS`, factoring A if ``f`` is not supplied."""
    if method == "GEPP-on-B":
        return gepp_on_b(sys)
    t0 = time.perf_counter()
    if f is None:
        f = _factor.factor(sys.A, "qr" if method == "SM-QR" else "lu")
    tf = time.perf_counter() - t0
    if method in ("SM-LU", "SM-QR"):
        rep = sm_solve(sys, f)
    elif method == "SM-LU-IR":
        rep = sm_ir_solve(sys, f, **ir_options)
    elif method == "BEC":
        rep = bec_solve(sys, f)
    else:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    rep.timings["factor"] = tf
    return rep
