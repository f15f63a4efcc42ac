"""Experiment grid runner: generate, solve with every method, measure."""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import gallery
from ..factor import NearSingularWarning, factor
from ..matcore import EPS
from ..smsolver import SmBreakdown, gepp_on_b, sm_ir_solve, sm_solve, bec_solve
from ..stability import bound_report, error_report

SCHEMA_VERSION = 1

#: CLI spelling -> report tag
METHOD_NAMES = {
    "gepp": "GEPP-on-B",
    "sm-lu": "SM-LU",
    "sm-qr": "SM-QR",
    "sm-lu-ir": "SM-LU-IR",
    "bec": "BEC",
}

TRIAL_COLUMNS = [
    "schema_version", "case", "n", "kappa_A", "mode", "lower_bw", "upper_bw", "density", "seed",
    "method", "status", "message", "normwise_berr", "componentwise_berr", "forward_err",
    "ir_steps", "converged", "diverged", "breakdown", "kappa_B", "oracle_reliable",
    "growth_hypothesis", "growth_bound_holds", "zeta", "c_check", "normwise_bound",
    "residual_2norm", "sm_bound_ratio", "one_step_ratio",
]

TIMING_COLUMNS = ["case", "n", "kappa_A", "seed", "method", "seconds", "ratio_to_gepp"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    case: str
    n: int
    kappas: list
    seeds: int = 10
    first_seed: int = 0
    methods: list = field(default_factory=lambda: ["SM-LU", "SM-LU-IR", "GEPP-on-B"])
    mode: int | None = None
    lower_bw: int | None = None
    upper_bw: int | None = None
    density: float | None = None
    dense: bool = False
    tol: float = 5 * EPS
    max_ir: int = 20
    criterion: str = "normwise"
    measure_kappa_B: bool = True
    bounds: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.case not in gallery.CASES:
            raise ConfigError(f"unknown case {self.case!r}; choose from {', '.join(gallery.CASES)}")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not self.kappas:
            raise ConfigError("kappa list is empty")
        if any(not (k >= 1) for k in self.kappas):
            raise ConfigError("every kappa must be >= 1")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.mode is not None and self.mode not in gallery.MODES:
            raise ConfigError(f"mode must be one of {gallery.MODES}")
        bad = [m for m in self.methods if m not in METHOD_NAMES.values()]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {', '.join(METHOD_NAMES)}")
        if self.max_ir < 0 or not self.tol > 0:
            raise ConfigError("tol must be positive and max_ir nonnegative")
        if self.density is not None and not 0 < self.density <= 1:
            raise ConfigError("density must lie in (0, 1]")
        for bw in (self.lower_bw, self.upper_bw):
            if bw is not None and not 0 <= bw < self.n:
                raise ConfigError(f"bandwidth {bw} out of range for n={self.n}")
        return self

    def band(self) -> tuple[int | None, int | None]:
        if self.density is not None or self.dense:
            return None, None
        bw = gallery.CASE_DEFAULTS[self.case]["bandwidth"]
        return (bw if self.lower_bw is None else self.lower_bw,
                bw if self.upper_bw is None else self.upper_bw)

    def resolved_mode(self) -> int:
        return gallery.CASE_DEFAULTS[self.case]["mode"] if self.mode is None else self.mode

    def seed_list(self) -> list[int]:
        return list(range(self.first_seed, self.first_seed + self.seeds))


@dataclass
class TrialResult:
    record: dict
    timing: float
    reports: dict = field(default_factory=dict, repr=False)


def build_problem(cfg: ExperimentConfig, kappa: float, seed: int) -> gallery.GeneratedProblem:
    lo, up = cfg.band()
    return gallery.generate(cfg.case, cfg.n, kappa, seed, mode=cfg.resolved_mode(), lower_bw=lo,
                            upper_bw=up, density=cfg.density, dense=cfg.dense,
                            measure_kappa_B=cfg.measure_kappa_B)


def _base_record(cfg, kappa, seed, method, prob) -> dict:
    lo, up = cfg.band()
    rec = dict.fromkeys(TRIAL_COLUMNS)
    rec.update(schema_version=SCHEMA_VERSION, case=cfg.case, n=cfg.n, kappa_A=float(kappa),
               mode=cfg.resolved_mode(), lower_bw=lo, upper_bw=up, density=cfg.density, seed=seed,
               method=method, status="ok", message="", breakdown=False)
    if prob is not None:
        rec["kappa_B"] = prob.kappa_B_measured
        rec["oracle_reliable"] = prob.oracle_reliable
    return rec


def run_trial(cfg: ExperimentConfig, kappa: float, seed: int, keep_reports: bool = False) -> list[TrialResult]:
    """All methods on one generated problem; failures become records, not exceptions."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NearSingularWarning)
            prob = build_problem(cfg, kappa, seed)
    except Exception as exc:  # generation failed: every method inherits the error
        out = []
        for m in cfg.methods:
            rec = _base_record(cfg, kappa, seed, m, None)
            rec.update(status="error", message=f"generation: {type(exc).__name__}: {exc}")
            out.append(TrialResult(rec, math.nan))
        return out

    sys = prob.sys
    sigma = (prob.sigma[0], prob.sigma[-1])
    factors, factor_time = {}, {}
    results = []
    for method in cfg.methods:
        rec = _base_record(cfg, kappa, seed, method, prob)
        rep = None
        shared = 0.0
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NearSingularWarning)
                if method == "GEPP-on-B":
                    rep = gepp_on_b(sys)
                else:
                    kind = "qr" if method == "SM-QR" else "lu"
                    if kind not in factors:
                        tf = time.perf_counter()
                        factors[kind] = factor(sys.A, kind)
                        factor_time[kind] = time.perf_counter() - tf
                    else:
                        shared = factor_time[kind]  # every method is charged for its factorization
                    f = factors[kind]
                    if method in ("SM-LU", "SM-QR"):
                        rep = sm_solve(sys, f)
                    elif method == "SM-LU-IR":
                        rep = sm_ir_solve(sys, f, tol=cfg.tol, max_ir=cfg.max_ir, criterion=cfg.criterion)
                    else:
                        rep = bec_solve(sys, f)
        except SmBreakdown as exc:
            rec.update(status="breakdown", breakdown=True, message=str(exc))
        except Exception as exc:
            rec.update(status="error", message=f"{type(exc).__name__}: {exc}")
        elapsed = time.perf_counter() - t0 + shared
        if rep is not None:
            _fill_metrics(rec, cfg, sys, prob, rep, sigma)
        results.append(TrialResult(rec, elapsed, {method: rep} if keep_reports else {}))
    return results


def _fill_metrics(rec, cfg, sys, prob, rep, sigma) -> None:
    er = error_report(sys, rep.solution, prob.x_ref)
    rec.update(normwise_berr=er.normwise_berr, componentwise_berr=er.componentwise_berr,
               forward_err=er.forward_err)
    if rep.ir_trace is not None:
        rec.update(ir_steps=rep.ir_trace.step_count, converged=rep.ir_trace.converged,
                   diverged=rep.ir_trace.diverged)
    if cfg.bounds and rep.sm_trace is not None and rep.method != "BEC":
        br = bound_report(sys, rep, sigma=sigma)
        rec.update(growth_hypothesis=br.growth_hypothesis_holds, growth_bound_holds=br.growth_bound_holds,
                   zeta=br.zeta, c_check=br.c_check, normwise_bound=br.normwise_bound,
                   residual_2norm=br.residual_2norm, sm_bound_ratio=br.sm_bound_ratio,
                   one_step_ratio=br.one_step_ratio)


def run_experiment(cfg: ExperimentConfig, progress=None) -> tuple[list[dict], list[dict]]:
    """Run the whole grid; returns (trial records, timing records), both in
    (kappa, seed, method) order."""
    cfg.validate()
    records, timings = [], []
    for kappa in cfg.kappas:
        for seed in cfg.seed_list():
            results = run_trial(cfg, kappa, seed)
            ref = next((r.timing for r in results if r.record["method"] == "GEPP-on-B"), None)
            for res in results:
                records.append(res.record)
                ratio = res.timing / ref if ref and math.isfinite(res.timing) else None
                timings.append(dict(case=cfg.case, n=cfg.n, kappa_A=float(kappa), seed=seed,
                                    method=res.record["method"], seconds=res.timing, ratio_to_gepp=ratio))
            if progress:
                progress(kappa, seed)
    return records, timings


# -- IR traces ------------------------------------------------------------------

TRACE_COLUMNS = ["case", "n", "kappa_A", "seed", "step", "residual_norm", "normwise_berr",
                 "componentwise_berr", "converged"]


def run_trace(cfg: ExperimentConfig) -> list[dict]:
    """Per-step SM-LU-IR history for every (kappa, seed); step 0 is the plain SM solve."""
    cfg.validate()
    rows = []
    for kappa in cfg.kappas:
        for seed in cfg.seed_list():
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NearSingularWarning)
                prob = build_problem(cfg, kappa, seed)
                sys = prob.sys
                rep = sm_ir_solve(sys, factor(sys.A), tol=cfg.tol, max_ir=cfg.max_ir, criterion=cfg.criterion)
            ir = rep.ir_trace
            res = ir.residual_history()
            nw = ir.berr_history("normwise")
            cw = ir.berr_history("componentwise")
            for k in range(len(nw)):
                rows.append(dict(case=cfg.case, n=cfg.n, kappa_A=float(kappa), seed=seed, step=k,
                                 residual_norm=res[k], normwise_berr=nw[k], componentwise_berr=cw[k],
                                 converged=ir.converged if k == len(nw) - 1 else False))
    return rows
