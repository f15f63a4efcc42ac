"""Error measures and rounding-error bounds for rank-one updated solves.

Norms are infinity norms unless a name says otherwise.  The bound
evaluators return vectors (or scalars) in units where the inequality being
tested reads ``|r| <= eps * (...)``.  Constants ``c`` and ``d`` are the
small integer multipliers of the gamma terms (default 1).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .factor import SigmaEstimate, sigma_extremes
from .matcore import EPS, abs_matvec, as_vector, comp_residual_pair, fast_operator, seqdot
from .smsolver import IrTrace, RankOneSystem, SmTrace, SolveReport, _componentwise, _normwise, residual

__all__ = [
    "ErrorReport", "BoundReport", "RigalGachesCheck", "HypothesisViolated", "GrowthCheck",
    "gamma", "residual", "normwise_berr", "componentwise_berr", "forward_err", "error_report",
    "g_bound", "h_bound", "t_bound", "sm_residual_bound", "one_step_ratio", "growth_check", "normwise_bound",
    "rigal_gaches_check", "norm2_B", "bound_report",
]


class HypothesisViolated(ValueError):
    """The bound's precondition does not hold, so it is not evaluated."""


def gamma(k: int) -> float:
    """k eps / (1 - k eps)."""
    ke = k * EPS
    if ke >= 1.0:
        raise HypothesisViolated(f"gamma({k}) undefined: k*eps >= 1")
    return ke / (1.0 - ke)


# -- error measures -----------------------------------------------------------

def normwise_berr(sys: RankOneSystem, x_hat, r) -> float:
    """||r|| / (||B|| ||x|| + ||b||); +inf for 0 denominator with r != 0."""
    return _normwise(sys, as_vector(x_hat, sys.n), as_vector(r, sys.n))


def componentwise_berr(sys: RankOneSystem, x_hat, r) -> float:
    """max_i |r_i| / (|B||x| + |b|)_i with 0/0 read as 0 and r_i/0 as +inf."""
    return _componentwise(sys, as_vector(x_hat, sys.n), as_vector(r, sys.n))


def forward_err(x_hat, x_ref, with_flag: bool = False):
    """||x - x_ref|| / ||x_ref||, or the absolute error when x_ref = 0.

    With ``with_flag`` a pair (error, absolute) is returned.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_ref = np.asarray(x_ref, dtype=np.float64)
    diff = float(np.abs(x_hat - x_ref).max()) if x_ref.size else 0.0
    ref = float(np.abs(x_ref).max()) if x_ref.size else 0.0
    absolute = ref == 0.0
    err = diff if absolute else diff / ref
    return (err, absolute) if with_flag else err


@dataclass
class ErrorReport:
    residual: np.ndarray
    normwise_berr: float
    componentwise_berr: float
    residual_norm: float
    forward_err: float | None = None
    forward_err_absolute: bool = False

    def to_dict(self, with_vectors: bool = False) -> dict:
        d = asdict(self)
        d["residual"] = self.residual.tolist() if with_vectors else None
        if not with_vectors:
            del d["residual"]
        return d


def error_report(sys: RankOneSystem, x_hat, x_ref=None) -> ErrorReport:
    x_hat = as_vector(x_hat, sys.n)
    r = residual(sys, x_hat)
    fe, absolute = (None, False) if x_ref is None else forward_err(x_hat, x_ref, with_flag=True)
    return ErrorReport(r, normwise_berr(sys, x_hat, r), componentwise_berr(sys, x_hat, r),
                       float(np.abs(r).max()) if r.size else 0.0, fe, absolute)


# -- componentwise bounds -------------------------------------------------------

def g_bound(sys: RankOneSystem, x_hat, c: int = 1) -> np.ndarray:
    """g(A,u,v)|x| with g = (c n^2 e e^T + I)|A| + (n+1)|u||v|^T."""
    n = sys.n
    ax = abs_matvec(sys.A, x_hat)
    vx = float(np.abs(sys.v) @ np.abs(x_hat))
    return c * n * n * float(ax.sum()) + ax + (n + 1) * np.abs(sys.u) * vx


def h_bound(sys: RankOneSystem, z_hat, alpha_ratio: float, d: int = 1) -> np.ndarray:
    """h = rho [(2 d n^2 e e^T + 3I)|A| + 2(n+4)|u||v|^T] |z| + 2 rho |u|,
    with rho = |alpha|/|beta| and |z_hat| standing in for |A^{-1} u|."""
    n = sys.n
    az = abs_matvec(sys.A, z_hat)
    vz = float(np.abs(sys.v) @ np.abs(z_hat))
    au = np.abs(sys.u)
    inner = 2 * d * n * n * float(az.sum()) + 3.0 * az + 2 * (n + 4) * au * vz
    return alpha_ratio * inner + 2.0 * alpha_ratio * au


def t_bound(sys: RankOneSystem, x_hat) -> np.ndarray:
    """t = (gamma_{n+2}/eps) (|b| + (|A| + |u||v|^T)|x|)."""
    x_hat = as_vector(x_hat, sys.n)
    vx = float(np.abs(sys.v) @ np.abs(x_hat))
    return (gamma(sys.n + 2) / EPS) * (np.abs(sys.b) + abs_matvec(sys.A, x_hat) + np.abs(sys.u) * vx)


def sm_residual_bound(sys: RankOneSystem, trace: SmTrace, c: int = 1, d: int = 1) -> np.ndarray:
    """eps (g|x| + h): the componentwise first-order bound on the SM residual."""
    rho = abs(trace.alpha) / abs(trace.beta)
    return EPS * (g_bound(sys, trace.x_hat, c) + h_bound(sys, trace.z_hat, rho, d))


def one_step_ratio(sys: RankOneSystem, ir_trace: IrTrace, sm_trace: SmTrace, d: int = 1) -> float:
    """max_i h(A,u,v,r_hat)_i / (|B||w| + |b|)_i for the first refinement step."""
    if ir_trace.step_count == 0:
        raise ValueError("the refinement trace has no steps")
    step = ir_trace.steps[0]
    rho = abs(step.alpha_r) / abs(sm_trace.beta)
    h = h_bound(sys, sm_trace.z_hat, rho, d)
    den = sys.abs_B_matvec(step.w) + np.abs(sys.b)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(den > 0, h / np.where(den > 0, den, 1.0), np.where(h > 0, np.inf, 0.0))
    return float(q.max())


# -- normwise bounds ------------------------------------------------------------

@dataclass(frozen=True)
class GrowthCheck:
    hypothesis_holds: bool
    zeta: float
    c_check: float
    bound_holds: bool | None  # None when the hypothesis fails
    lhs: float
    rhs: float


GROWTH_SLACK = 1.0 + 8 * EPS


def growth_check(trace: SmTrace, v) -> GrowthCheck:
    """Evaluate ||y|| + |alpha/beta| ||z|| <= c_check ||y|| (2-norms).

    The hypothesis is |v^T z| > 1.1; zeta = 1/(v^T z) and
    c_check = 1 + |cos(v,y)| / ((1 - |zeta|) |cos(v,z)|).  When v^T z < -1
    the inequality is attained exactly, so it is compared with a relative
    slack of 8 eps to absorb the rounding in evaluating both sides.
    """
    v = np.asarray(v, dtype=np.float64)
    vz = trace.vz
    holds = abs(vz) > 1.1
    ny, nz, nv = (float(np.linalg.norm(a)) for a in (trace.y_hat, trace.z_hat, v))
    zeta = 1.0 / vz if vz != 0.0 else np.inf
    lhs = ny + abs(trace.alpha / trace.beta) * nz
    if not holds:
        return GrowthCheck(False, zeta, np.nan, None, lhs, np.nan)
    cos_y = abs(trace.alpha) / (nv * ny) if ny else 0.0
    cos_z = abs(vz) / (nv * nz)
    c_check = 1.0 + cos_y / ((1.0 - abs(zeta)) * cos_z)
    rhs = c_check * ny
    return GrowthCheck(True, zeta, c_check, bool(lhs <= rhs * GROWTH_SLACK), lhs, rhs)


def norm2_B(sys: RankOneSystem, tol: float = 1e-6, maxiter: int = 300) -> float:
    """Power-iteration estimate of ||A + u v^T||_2."""
    mv, rmv = fast_operator(sys.A)
    u, v = sys.u, sys.v
    x = np.random.default_rng(7).standard_normal(sys.n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxiter):
        y = mv(x) + (v @ x) * u
        w = rmv(y) + (u @ y) * v
        new = np.sqrt(max(float(x @ w), 0.0))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        x = w / nw
        if est and abs(new - est) <= tol * new:
            return new
        est = new
    return est


def normwise_bound(sys: RankOneSystem, kappa_A: float, c1: float, c: float, *, c_check: float,
                 norm_A: float, norm_A_inv: float, norm_B: float | None = None,
                 norm_b: float | None = None) -> float:
    """eps c_check / (1 - c1 eps kappa) (c ||A|| + ||B||) ||A^{-1}|| ||b||.

    Norms are supplied by the caller so any consistent norm can be used; the
    experiment code uses 2-norms with ||A^{-1}||_2 = 1/sigma_min(A).
    """
    if c1 * EPS * kappa_A >= 1.0:
        raise HypothesisViolated(f"c1*eps*kappa(A) = {c1 * EPS * kappa_A:.3g} >= 1")
    if norm_B is None:
        norm_B = norm2_B(sys)
    if norm_b is None:
        norm_b = float(np.linalg.norm(sys.b))
    return EPS * c_check / (1.0 - c1 * EPS * kappa_A) * (c * norm_A + norm_B) * norm_A_inv * norm_b


# -- constructive backward-error check ---------------------------------------------

@dataclass(frozen=True)
class RigalGachesCheck:
    eta: float                  # from the compensated residual
    perturbed_residual: float   # ||b + db - (B + dB) x|| / (||B|| ||x|| + ||b||)
    dB_rel: float
    db_rel: float
    passed: bool


def rigal_gaches_check(sys: RankOneSystem, x_hat) -> RigalGachesCheck:
    """Build the perturbation that attains the normwise backward error and verify it.

    With r the (double-double) residual, k = argmax |x_k| and
    den = ||B|| ||x|| + ||b||, take dB = (||B||/den) r sign(x_k) e_k^T and
    db = -(||b||/den) r.  Then (B + dB) x = b + db exactly, ||dB|| = eta ||B||
    and ||db|| = eta ||b||.  The perturbed system's residual is evaluated in
    double-double as well.
    """
    x_hat = as_vector(x_hat, sys.n)
    hi, lo = comp_residual_pair(sys.A, sys.u, sys.v, sys.b, x_hat)
    r = hi + lo
    nB, nb = sys.norm_B_inf, sys.norm_b_inf
    nx = float(np.abs(x_hat).max())
    den = nB * nx + nb
    rn = float(np.abs(r).max())
    if den == 0.0:
        ok = rn == 0.0
        return RigalGachesCheck(0.0 if ok else np.inf, rn, 0.0, 0.0, ok)
    eta = rn / den
    k = int(np.argmax(np.abs(x_hat)))
    p = (nB / den) * r
    q = np.zeros(sys.n)
    if nx > 0:
        q[k] = np.sign(x_hat[k])
    else:
        p = np.zeros(sys.n)
    db = -(nb / den) * r
    phi, plo = comp_residual_pair(sys.A, sys.u, sys.v, sys.b, x_hat, extra=(p, q, db))
    pres = float(np.abs(phi + plo).max()) / den
    dB_rel = float(np.abs(p).max()) * float(np.abs(q).max()) / nB if nB else 0.0
    db_rel = float(np.abs(db).max()) / nb if nb else 0.0
    tol_eta = 1.01 * eta
    passed = pres <= 10 * EPS and dB_rel <= tol_eta and db_rel <= tol_eta
    return RigalGachesCheck(eta, pres, dB_rel, db_rel, bool(passed))


# -- everything at once -------------------------------------------------------------

@dataclass
class BoundReport:
    growth_hypothesis_holds: bool
    zeta: float
    c_check: float
    growth_bound_holds: bool | None
    normwise_bound: float | None
    g_vec: np.ndarray           # g(A,u,v)|x|
    h_vec: np.ndarray
    t_vec: np.ndarray
    one_step_ratio: float | None
    sm_bound_ratio: float       # max_i |r_i| / (eps (g|x| + h))_i
    residual_2norm: float
    notes: list = field(default_factory=list)

    def to_dict(self, with_vectors: bool = False) -> dict:
        d = {k: getattr(self, k) for k in (
            "growth_hypothesis_holds", "zeta", "c_check", "growth_bound_holds", "normwise_bound",
            "one_step_ratio", "sm_bound_ratio", "residual_2norm", "notes")}
        for k in ("g_vec", "h_vec", "t_vec"):
            vec = getattr(self, k)
            d[k] = vec.tolist() if with_vectors else {"max": float(vec.max()), "min": float(vec.min())}
        return d


def bound_report(sys: RankOneSystem, rep: SolveReport, *, sigma: SigmaEstimate | tuple | None = None,
                 f=None, c: int = 1, d: int = 1, c1: float | None = None, c_prop: float | None = None,
                 ) -> BoundReport:
    """Evaluate every bound for the base SM solve held in ``rep``.

    ``sigma`` is (sigma_max(A), sigma_min(A)); if omitted it is estimated
    from ``f``.  ``c1`` and ``c_prop`` default to 8n.
    """
    tr = rep.sm_trace
    if tr is None:
        raise ValueError(f"{rep.method} reports carry no SM trace")
    n = sys.n
    notes = []
    x = tr.x_hat
    r = residual(sys, x)
    rho = abs(tr.alpha) / abs(tr.beta)
    g = g_bound(sys, x, c)
    h = h_bound(sys, tr.z_hat, rho, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        tot = EPS * (g + h)
        q = np.where(tot > 0, np.abs(r) / np.where(tot > 0, tot, 1.0), np.where(r != 0, np.inf, 0.0))
    lem = growth_check(tr, sys.v)
    prop = None
    if lem.hypothesis_holds:
        if sigma is None and f is not None:
            sigma = sigma_extremes(sys.A, f)
        if sigma is not None and sigma[1] > 0:
            smax, smin = float(sigma[0]), float(sigma[1])
            try:
                prop = normwise_bound(sys, smax / smin, 8 * n if c1 is None else c1,
                                    8 * n if c_prop is None else c_prop,
                                    c_check=lem.c_check, norm_A=smax, norm_A_inv=1.0 / smin)
            except HypothesisViolated as exc:
                notes.append(str(exc))
        else:
            notes.append("normwise bound not evaluated: no singular value estimate")
    else:
        notes.append("growth hypothesis |v^T z| > 1.1 fails")
    one_step = None
    if rep.ir_trace is not None and rep.ir_trace.step_count:
        one_step = one_step_ratio(sys, rep.ir_trace, tr, d)
    return BoundReport(lem.hypothesis_holds, lem.zeta, lem.c_check, lem.bound_holds, prop,
                       g, h, t_bound(sys, x), one_step, float(q.max()),
                       float(np.linalg.norm(r)), notes)
