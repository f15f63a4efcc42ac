"""Seeded test problems with known singular values.

A matrix with prescribed singular values sigma is built as
``A = U diag(sigma) W`` where U and W are products of plane rotations
applied in layers of disjoint index pairs: left rotations act on rows of A,
right rotations on columns.  Choosing which pairs each layer touches
controls the bandwidth of the result:

* banded: layers on adjacent pairs (i, i+1); the first left and right layer
  share the same pairing so together they only fill 2x2 diagonal blocks, and
  every further layer widens the band by one on each side;
* dense: "butterfly" layers pairing i with i + 2^k, so log2(n) layers reach
  every entry.

The rotation log is kept, so singular vectors can be recovered exactly (up
to the rounding of applying the rotations).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .factor import ExactlySingular, plu_factor, sigma_extremes
from .matcore import (
    EPS,
    BandedMatrix,
    DenseMatrix,
    SparseMatrix,
    comp_rank1_matvec,
    comp_residual,
    to_dense,
)
from .rng import stream
from .smsolver import RankOneSystem

MODES = (1, 2, 3, 5)
CASES = ("1i", "1ii", "2i", "2ii", "3", "4")

#: per-case defaults: randsvd mode, band shape and the kappa(A) grid
CASE_DEFAULTS = {
    "1i": dict(mode=1, bandwidth=1, kappas=(1e6, 1e8, 1e10, 1e12)),
    "1ii": dict(mode=1, bandwidth=1, kappas=(1e6, 1e8, 1e10, 1e12)),
    "2i": dict(mode=5, bandwidth=1, kappas=(1e1, 1e2, 1e3, 1e4)),
    "2ii": dict(mode=5, bandwidth=1, kappas=(1e1, 1e2, 1e3, 1e4)),
    "3": dict(mode=2, bandwidth=2, kappas=(1e7, 1e9, 1e11, 1e13)),
    "4": dict(mode=3, bandwidth=2, kappas=(1e1, 1e2, 1e3, 1e4)),
}

#: range of the rank-one scale in case 3; kappa(B) equals the drawn scale
CASE3_SCALE = (10 ** 2.5, 10 ** 2.9)


class GalleryError(ValueError):
    pass


@dataclass(frozen=True)
class RotationLayer:
    side: str            # "L" (rows) or "R" (columns)
    i: np.ndarray
    j: np.ndarray
    c: np.ndarray
    s: np.ndarray


def _rotate_rows(a: np.ndarray, i, j, c, s) -> None:
    ai = a[i].copy()
    aj = a[j]
    if a.ndim == 2:
        c, s = c[:, None], s[:, None]
    a[i] = c * ai + s * aj
    a[j] = -s * ai + c * aj


def _rotate_cols(a: np.ndarray, i, j, c, s) -> None:
    ai = a[..., i].copy()
    aj = a[..., j]
    a[..., i] = c * ai + s * aj
    a[..., j] = -s * ai + c * aj


@dataclass
class GeneratedProblem:
    A: object
    sigma: np.ndarray
    kappa_A_target: float
    seed: int
    mode: int | None = None
    rotations: list = field(default_factory=list, repr=False)
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    b: np.ndarray | None = None
    x_ref: np.ndarray | None = None
    case_tag: str | None = None
    kappa_B_measured: float | None = None
    oracle_reliable: bool | None = None
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def sys(self) -> RankOneSystem:
        if self.u is None:
            raise GalleryError("problem has no rank-one update yet; call make_case")
        return RankOneSystem(self.A, self.u, self.v, self.b)

    @property
    def has_singular_vectors(self) -> bool:
        return bool(self.rotations) or self.info.get("diagonal", False)

    def _replay(self, vec: np.ndarray, side: str) -> np.ndarray:
        for layer in self.rotations:
            if layer.side == side:
                (_rotate_rows if side == "L" else _rotate_cols)(vec, layer.i, layer.j, layer.c, layer.s)
        return vec

    def left_vector(self, k: int) -> np.ndarray:
        """Column k of U, the left singular vector for sigma[k]."""
        e = np.zeros(self.n)
        e[k] = 1.0
        return self._replay(e, "L")

    def right_vector(self, k: int) -> np.ndarray:
        """Row k of W, the right singular vector for sigma[k]."""
        e = np.zeros(self.n)
        e[k] = 1.0
        return self._replay(e, "R")

    @property
    def u_min(self) -> np.ndarray:
        return self.left_vector(self.n - 1)

    @property
    def v_min(self) -> np.ndarray:
        return self.right_vector(self.n - 1)

    def U(self) -> np.ndarray:
        return self._replay(np.eye(self.n), "L")

    def W(self) -> np.ndarray:
        return self._replay(np.eye(self.n), "R")


def singular_values(n: int, kappa: float, mode: int, seed: int = 0) -> np.ndarray:
    """Descending singular value profile with sigma[0]/sigma[-1] = kappa."""
    if mode not in MODES:
        raise GalleryError(f"unsupported randsvd mode {mode}; choose from {MODES}")
    if not kappa >= 1.0:
        raise GalleryError(f"kappa must be >= 1, got {kappa}")
    if n < 1:
        raise GalleryError("n must be positive")
    if n == 1:
        if kappa != 1.0:
            raise GalleryError("a 1x1 matrix has condition number 1")
        return np.ones(1)
    if mode == 1:
        s = np.full(n, 1.0 / kappa)
        s[0] = 1.0
    elif mode == 2:
        s = np.ones(n)
        s[-1] = 1.0 / kappa
    elif mode == 3:
        s = kappa ** (-np.arange(n) / (n - 1))
        s[-1] = 1.0 / kappa
    else:
        s = np.sort(stream(seed, "sigma").log_uniform(n, 1.0 / kappa, 1.0))[::-1].copy()
        s[0], s[-1] = 1.0, 1.0 / kappa
    return s


def _pair_layer(n: int, kind, rng_stream):
    if kind[0] == "adj":
        i = np.arange(kind[1], n - 1, 2)
        j = i + 1
    else:  # butterfly with stride 2^k
        k = kind[1]
        idx = np.arange(n)
        i = idx[((idx // k) % 2 == 0) & (idx + k < n)]
        j = i + k
    t = rng_stream.uniform(i.size, 0.0, 2.0 * np.pi)
    return i, j, np.cos(t), np.sin(t)


def band_layer_schedule(bandwidth: int) -> list[tuple[str, tuple]]:
    if bandwidth <= 0:
        return []
    seq = [("L", ("adj", 0)), ("R", ("adj", 0))]
    side = "L"
    for k in range(1, bandwidth):
        seq.append((side, ("adj", k % 2)))
        side = "R" if side == "L" else "L"
    return seq


def dense_layer_schedule(n: int, rounds: int = 2) -> list[tuple[str, tuple]]:
    seq = []
    side = "L"
    for _ in range(rounds):
        k = 1
        while k < n:
            seq.append((side, ("bf", k)))
            side = "R" if side == "L" else "L"
            k *= 2
    return seq


def _build(n, sigma, schedule, seed, label):
    a = np.diag(sigma)
    rs = stream(seed, label, "angles")
    log = []
    for side, kind in schedule:
        i, j, c, s = _pair_layer(n, kind, rs)
        if i.size == 0:
            continue
        (_rotate_rows if side == "L" else _rotate_cols)(a, i, j, c, s)
        log.append(RotationLayer(side, i, j, c, s))
    return a, log


def randsvd_banded(n: int, kappa: float, mode: int, lower_bw: int, upper_bw: int, seed: int) -> GeneratedProblem:
    """Band matrix with singular values from ``mode``.

    Rotations fill a symmetric band of width min(lower_bw, upper_bw); the
    stored band is the requested one.
    """
    if lower_bw < 0 or upper_bw < 0 or lower_bw >= n and n > 1 or upper_bw >= n and n > 1:
        raise GalleryError(f"bandwidths ({lower_bw}, {upper_bw}) invalid for n={n}")
    sigma = singular_values(n, kappa, mode, seed)
    bw = min(lower_bw, upper_bw)
    a, log = _build(n, sigma, band_layer_schedule(bw), seed, "banded")
    i, j = np.nonzero(a)
    assert np.all(np.abs(i - j) <= bw), "rotation schedule escaped the band"
    p, q = lower_bw, upper_bw
    if p + q + 1 > n:
        mat = DenseMatrix(a)
    else:
        mat = BandedMatrix.from_dense(a, p, q, check=False)
    return GeneratedProblem(mat, sigma, float(kappa), seed, mode, log, info={"diagonal": bw == 0})


def randsvd_dense(n: int, kappa: float, mode: int, seed: int, rounds: int = 2) -> GeneratedProblem:
    """Dense matrix with singular values from ``mode`` (butterfly rotations)."""
    sigma = singular_values(n, kappa, mode, seed)
    a, log = _build(n, sigma, dense_layer_schedule(n, rounds), seed, "dense")
    return GeneratedProblem(DenseMatrix(a), sigma, float(kappa), seed, mode, log)


def sparse_random(n: int, density: float, kappa: float, seed: int, mode: int = 3) -> GeneratedProblem:
    """Sparse matrix with about density * n^2 nonzeros and condition kappa.

    Starts from diag(sigma) and applies plane rotations on random index
    pairs, alternating rows and columns.  A rotation that would push the
    nonzero count past 1.1 * target is skipped; generation stops once the
    target is reached.  Singular values are exact by construction (up to
    rounding), so the measured condition number tracks kappa closely.
    """
    if density >= 1.0:
        return randsvd_dense(n, kappa, mode, seed)
    target = density * n * n
    if target < n or density <= 0:
        raise GalleryError(f"density {density} gives fewer than n={n} nonzeros")
    sigma = singular_values(n, kappa, mode, seed)
    a = np.diag(sigma)
    nnz = n
    rs = stream(seed, "sparse")
    log = []
    side = "L"
    limit = 1.1 * target
    attempts = 0
    max_attempts = 50 * n + 10 * int(target)
    while nnz < target and attempts < max_attempts:
        attempts += 1
        ij = rs.integers(0, n - 1, 2)
        i, j = int(ij[0]), int(ij[1])
        t = float(rs.uniform(1, 0.0, 2.0 * np.pi)[0])
        if i == j:
            continue
        if side == "L":
            before = np.count_nonzero(a[i]) + np.count_nonzero(a[j])
            after = 2 * np.count_nonzero((a[i] != 0) | (a[j] != 0))
        else:
            before = np.count_nonzero(a[:, i]) + np.count_nonzero(a[:, j])
            after = 2 * np.count_nonzero((a[:, i] != 0) | (a[:, j] != 0))
        if nnz - before + after > limit:
            continue
        c, s = np.array([np.cos(t)]), np.array([np.sin(t)])
        ii, jj = np.array([i]), np.array([j])
        (_rotate_rows if side == "L" else _rotate_cols)(a, ii, jj, c, s)
        log.append(RotationLayer(side, ii, jj, c, s))
        nnz = int(np.count_nonzero(a))
        side = "R" if side == "L" else "L"
    mat = SparseMatrix.from_dense(a)
    return GeneratedProblem(mat, sigma, float(kappa), seed, mode, log,
                            info={"nnz_target": target, "rotations": len(log)})


# -- oracle --------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    x: np.ndarray
    reliable: bool
    steps: int
    eta: float
    kappa_B: float


def oracle_solution(sys: RankOneSystem, max_steps: int = 40, check_kappa: bool = True) -> OracleResult:
    """GEPP on the dense B refined with double-double residuals.

    Refinement stops when the normwise backward error drops below eps, when
    a correction no longer changes the iterate, or after ``max_steps``.  The
    result is flagged unreliable when kappa(B) eps > 0.1.
    """
    bd = sys.dense_B()
    fb = plu_factor(bd)
    x = fb.solve(sys.b)
    nb = sys.norm_B_inf
    normb = sys.norm_b_inf
    steps = 0
    eta = np.inf
    for steps in range(max_steps + 1):
        r = comp_residual(sys.A, sys.u, sys.v, sys.b, x)
        den = nb * float(np.abs(x).max()) + normb
        eta = float(np.abs(r).max()) / den if den else 0.0
        if eta < EPS or steps == max_steps:
            break
        dx = fb.solve(r)
        x_new = x + dx
        if np.array_equal(x_new, x):
            break
        x = x_new
    kb = np.nan
    reliable = True
    if check_kappa:
        est = sigma_extremes(bd, fb)
        kb = est.kappa
        reliable = kb * EPS <= 0.1
    return OracleResult(x, reliable, steps, eta, kb)


def measure_kappa(mat) -> float:
    """2-norm condition number estimate from a dense PLU and power/inverse iteration."""
    d = to_dense(mat)
    try:
        f = plu_factor(d)
    except ExactlySingular:
        return np.inf
    return sigma_extremes(d, f).kappa


# -- cases ----------------------------------------------------------------------

def make_case(base: GeneratedProblem, case: str, seed: int | None = None,
              measure_kappa_B: bool = False) -> GeneratedProblem:
    """Attach u, v, b and a reference solution to ``base`` for one of :data:`CASES`.

    * 1i, 2i: Gaussian u, v and x; b = B x formed in double-double and rounded once.
    * 1ii, 2ii: Gaussian u, v and b; x from :func:`oracle_solution`.
    * 3: u = scale * (left singular vector of sigma_min), v = right singular
      vector of sigma_min, scale log-uniform in :data:`CASE3_SCALE`; this
      lifts sigma_min to about the scale, so kappa(B) is the scale.
      x Gaussian, b = B x.
    * 4: Gaussian u, v scaled so ||u||_2 ||v||_2 = sigma_min(A)/2, keeping
      kappa(B) <= 2 kappa(A) + 1; x Gaussian, b = B x.
    """
    if case not in CASES:
        raise GalleryError(f"unknown case {case!r}; choose from {CASES}")
    seed = base.seed if seed is None else seed
    n = base.n
    info = dict(base.info)
    if case == "3":
        if not base.has_singular_vectors:
            raise GalleryError("case 3 needs a base with retained singular vectors")
        scale = float(stream(seed, case, "scale").log_uniform(1, *CASE3_SCALE)[0])
        u = scale * base.u_min
        v = base.v_min
        info["case3_scale"] = scale
    else:
        u = stream(seed, case, "u").normal(n)
        v = stream(seed, case, "v").normal(n)
        if case == "4":
            s = np.sqrt(base.sigma[-1] / (2.0 * np.linalg.norm(u) * np.linalg.norm(v)))
            u, v = s * u, s * v
    oracle_reliable = True
    if case in ("1ii", "2ii"):
        b = stream(seed, case, "b").normal(n)
        sys = RankOneSystem(base.A, u, v, b)
        orc = oracle_solution(sys, check_kappa=measure_kappa_B)
        x = orc.x
        oracle_reliable = orc.reliable
        info["oracle_steps"] = orc.steps
        kb = orc.kappa_B if measure_kappa_B else None
    else:
        x = stream(seed, case, "x").normal(n)
        b = comp_rank1_matvec(base.A, u, v, x)
        kb = measure_kappa(RankOneSystem(base.A, u, v, b).dense_B()) if measure_kappa_B else None
    if kb is not None:
        oracle_reliable = oracle_reliable and kb * EPS <= 0.1
    return replace(base, u=u, v=v, b=b, x_ref=x, case_tag=case, kappa_B_measured=kb,
                   oracle_reliable=oracle_reliable, info=info)


def generate(case: str, n: int, kappa: float, seed: int, *, mode: int | None = None,
             bandwidth: int | None = None, lower_bw: int | None = None, upper_bw: int | None = None,
             density: float | None = None, dense: bool = False,
             measure_kappa_B: bool = False) -> GeneratedProblem:
    """Base matrix plus case in one call, with per-case defaults."""
    if case not in CASES:
        raise GalleryError(f"unknown case {case!r}; choose from {CASES}")
    defaults = CASE_DEFAULTS[case]
    mode = defaults["mode"] if mode is None else mode
    if density is not None:
        base = sparse_random(n, density, kappa, seed, mode=mode)
    elif dense:
        base = randsvd_dense(n, kappa, mode, seed)
    else:
        bw = defaults["bandwidth"] if bandwidth is None else bandwidth
        base = randsvd_banded(n, kappa, mode, bw if lower_bw is None else lower_bw,
                              bw if upper_bw is None else upper_bw, seed)
    return make_case(base, case, seed, measure_kappa_B=measure_kappa_B)
