"""Audit a user-supplied system and export gallery problems as Matrix Market files."""
from __future__ import annotations

import os
import warnings

import numpy as np

from .. import gallery
from ..factor import NearSingularWarning, factor, sigma_extremes
from ..matcore import DimensionError, MatrixMarketError, mm_read, mm_write, read_vector, write_vector
from ..smsolver import RankOneSystem, SolveReport, sm_ir_solve, sm_solve
from ..stability import bound_report, error_report, rigal_gaches_check
from .report import dump_json, write_text


class AuditInputError(ValueError):
    pass


def load_system(path_a, path_u, path_v, path_b) -> RankOneSystem:
    a = mm_read(path_a)
    vecs = {}
    for name, p in (("u", path_u), ("v", path_v), ("b", path_b)):
        vecs[name] = read_vector(p)
    n = a.shape[0]
    if a.shape[1] != n:
        raise AuditInputError(f"{path_a}: A must be square, got {a.shape[0]}x{a.shape[1]}")
    for name, p in (("u", path_u), ("v", path_v), ("b", path_b)):
        if vecs[name].shape[0] != n:
            raise AuditInputError(f"{p}: {name} has length {vecs[name].shape[0]}, A has order {n}")
    return RankOneSystem(a, vecs["u"], vecs["v"], vecs["b"])


def audit(path_a, path_u, path_v, path_b, path_x=None, *, tol=None, max_ir=20) -> dict:
    """Error and bound report for x (or for a fresh SM-LU-IR solve if x is absent)."""
    sys = load_system(path_a, path_u, path_v, path_b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearSingularWarning)
        f = factor(sys.A)
        base = sm_solve(sys, f)
        if path_x is None:
            kw = {} if tol is None else {"tol": tol}
            rep = sm_ir_solve(sys, f, max_ir=max_ir, base=base, **kw)
            x = rep.solution
            source = "SM-LU-IR"
        else:
            x = read_vector(path_x)
            if x.shape[0] != sys.n:
                raise AuditInputError(f"{path_x}: x has length {x.shape[0]}, A has order {sys.n}")
            rep = base
            source = "file"
        est = sigma_extremes(sys.A, f)
    er = error_report(sys, x)
    br = bound_report(sys, rep, sigma=(est.sigma_max, est.sigma_min) if est.sigma_min > 0 else None)
    rg = rigal_gaches_check(sys, x)
    out = {
        "n": sys.n,
        "solution_source": source,
        "error_report": er.to_dict(),
        "bound_report": br.to_dict(),
        "rigal_gaches": {"eta": rg.eta, "perturbed_residual": rg.perturbed_residual,
                         "dB_rel": rg.dB_rel, "db_rel": rg.db_rel, "passed": rg.passed},
        "sigma_estimate": {"sigma_max": est.sigma_max, "sigma_min": est.sigma_min,
                           "converged": est.converged, "near_singular": est.near_singular},
        "sm": {"alpha": base.sm_trace.alpha, "beta": base.sm_trace.beta, "theta": base.sm_trace.theta},
    }
    if rep.ir_trace is not None:
        out["ir"] = {"steps": rep.ir_trace.step_count, "converged": rep.ir_trace.converged,
                     "diverged": rep.ir_trace.diverged,
                     "normwise_history": rep.ir_trace.berr_history("normwise")}
    return out


def export_problem(prob: gallery.GeneratedProblem, outdir, extra: dict | None = None) -> dict:
    """Write A.mtx, u.mtx, v.mtx, b.mtx, x_ref.mtx and manifest.json."""
    os.makedirs(outdir, exist_ok=True)
    mm_write(prob.A, os.path.join(outdir, "A.mtx"))
    for name in ("u", "v", "b", "x_ref"):
        write_vector(getattr(prob, name), os.path.join(outdir, f"{name}.mtx"))
    manifest = {
        "case": prob.case_tag,
        "seed": prob.seed,
        "n": prob.n,
        "mode": prob.mode,
        "storage": type(prob.A).__name__,
        "kappa_A_target": prob.kappa_A_target,
        "kappa_B_measured": prob.kappa_B_measured,
        "oracle_reliable": prob.oracle_reliable,
        "sigma": [float(s) for s in prob.sigma],
        "files": {"A": "A.mtx", "u": "u.mtx", "v": "v.mtx", "b": "b.mtx", "x_ref": "x_ref.mtx"},
        "info": {k: v for k, v in prob.info.items()},
    }
    if extra:
        manifest.update(extra)
    write_text(os.path.join(outdir, "manifest.json"), dump_json(manifest))
    return manifest


__all__ = ["AuditInputError", "audit", "export_problem", "load_system", "MatrixMarketError", "DimensionError"]
