"""Command line interface: ``smir run | trace | audit | gen``.

Exit codes: 0 success, 1 configuration or input error, 2 some trials failed.
"""
from __future__ import annotations

import argparse
import os
import sys

from ..matcore import EPS
from .experiment import (
    METHOD_NAMES,
    TIMING_COLUMNS,
    TRACE_COLUMNS,
    TRIAL_COLUMNS,
    ConfigError,
    ExperimentConfig,
    run_experiment,
    run_trace,
)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2
SEED_ENV = "RANK1_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which we reserve for partial failures
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_float(text: str) -> float:
    """A float, also accepting multiples of eps such as ``5eps``."""
    t = text.strip().lower()
    if t.endswith("eps"):
        head = t[:-3]
        return (float(head) if head else 1.0) * EPS
    return float(t)


def parse_kappas(text: str) -> list[float]:
    return [float(k) for k in text.split(",") if k.strip()]


def parse_methods(text: str) -> list[str]:
    out = []
    for m in text.split(","):
        m = m.strip().lower()
        if m not in METHOD_NAMES:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}; choose from {', '.join(METHOD_NAMES)}")
        out.append(METHOD_NAMES[m])
    return out


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _grid_args(p: argparse.ArgumentParser, methods_default: str) -> None:
    p.add_argument("--case", required=True, help="1i, 1ii, 2i, 2ii, 3 or 4")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--kappa", type=parse_kappas, default=None,
                   help="comma-separated kappa(A) grid (default: the case's grid)")
    p.add_argument("--mode", type=int, default=None, help="randsvd mode 1, 2, 3 or 5")
    p.add_argument("--bandwidth", type=int, default=None, help="symmetric bandwidth of A")
    p.add_argument("--lower-bw", type=int, default=None)
    p.add_argument("--upper-bw", type=int, default=None)
    p.add_argument("--density", type=float, default=None, help="sparse A with this density")
    p.add_argument("--dense", action="store_true", help="dense A")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--seed", type=int, default=None, help=f"first seed (default ${SEED_ENV} or 0)")
    p.add_argument("--methods", type=parse_methods, default=parse_methods(methods_default))
    p.add_argument("--tol", type=parse_float, default=5 * EPS, help="IR tolerance, e.g. 5eps")
    p.add_argument("--max-ir", type=int, default=20)
    p.add_argument("--criterion", choices=("normwise", "componentwise"), default="normwise")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="smir", description="Sherman-Morrison solves with iterative refinement.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment grid")
    _grid_args(run, "sm-lu,sm-lu-ir,gepp")
    run.add_argument("--no-kappa-b", action="store_true", help="skip measuring kappa(B)")
    run.add_argument("--no-plots", action="store_true")

    tr = sub.add_parser("trace", help="per-step refinement history")
    _grid_args(tr, "sm-lu-ir")
    tr.add_argument("--no-plots", action="store_true")

    au = sub.add_parser("audit", help="error and bound report for a Matrix Market system")
    au.add_argument("--A", dest="path_a", required=True)
    au.add_argument("--u", dest="path_u", required=True)
    au.add_argument("--v", dest="path_v", required=True)
    au.add_argument("--b", dest="path_b", required=True)
    au.add_argument("--x", dest="path_x", default=None, help="candidate solution (default: solve)")
    au.add_argument("--tol", type=parse_float, default=None)
    au.add_argument("--max-ir", type=int, default=20)
    au.add_argument("--out", default=None, help="write JSON here instead of stdout")

    ge = sub.add_parser("gen", help="export one gallery problem as Matrix Market files")
    ge.add_argument("--case", required=True)
    ge.add_argument("--n", type=int, default=100)
    ge.add_argument("--kappa", type=float, required=True)
    ge.add_argument("--mode", type=int, default=None)
    ge.add_argument("--bandwidth", type=int, default=None)
    ge.add_argument("--lower-bw", type=int, default=None)
    ge.add_argument("--upper-bw", type=int, default=None)
    ge.add_argument("--density", type=float, default=None)
    ge.add_argument("--dense", action="store_true")
    ge.add_argument("--seed", type=int, default=None)
    ge.add_argument("--out", required=True)
    return p


def config_from_args(args) -> ExperimentConfig:
    from ..gallery import CASE_DEFAULTS

    if args.case not in CASE_DEFAULTS:
        raise ConfigError(f"unknown case {args.case!r}; choose from {', '.join(CASE_DEFAULTS)}")
    lo = args.lower_bw if args.lower_bw is not None else args.bandwidth
    up = args.upper_bw if args.upper_bw is not None else args.bandwidth
    return ExperimentConfig(
        case=args.case, n=args.n,
        kappas=list(args.kappa) if args.kappa is not None else list(CASE_DEFAULTS[args.case]["kappas"]),
        seeds=args.seeds, first_seed=default_seed() if args.seed is None else args.seed,
        methods=args.methods, mode=args.mode, lower_bw=lo, upper_bw=up, density=args.density,
        dense=args.dense, tol=args.tol, max_ir=args.max_ir, criterion=args.criterion,
        measure_kappa_B=not getattr(args, "no_kappa_b", False),
    ).validate()


def cmd_run(args) -> int:
    from .plotting import experiment_figures
    from .report import dump_json, stringify_rows, summarize, write_csv, write_text

    cfg = config_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    records, timings = run_experiment(cfg)
    rows = stringify_rows(records)
    write_csv(os.path.join(args.out, "trials.csv"), rows, TRIAL_COLUMNS)
    write_csv(os.path.join(args.out, "timings.csv"), timings, TIMING_COLUMNS)
    write_text(os.path.join(args.out, "summary.json"), dump_json(summarize(rows)))
    if not args.no_plots:
        experiment_figures(rows, args.out, cfg.case)
    failed = sum(r["status"] != "ok" for r in records)
    print(f"{len(records)} trial records written to {args.out} ({failed} failed)")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_trace(args) -> int:
    from .plotting import trace_figure
    from .report import write_csv

    cfg = config_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    rows = run_trace(cfg)
    write_csv(os.path.join(args.out, "ir_trace.csv"), rows, TRACE_COLUMNS)
    if not args.no_plots:
        for kappa in cfg.kappas:
            for seed in cfg.seed_list():
                sel = [r for r in rows if r["kappa_A"] == float(kappa) and r["seed"] == seed]
                trace_figure(sel, os.path.join(args.out, f"trace_k{kappa:g}_s{seed}.svg"),
                             f"case {cfg.case}, n={cfg.n}, kappa(A)={kappa:g}, seed {seed}")
    print(f"{len(rows)} trace rows written to {args.out}")
    return EXIT_OK


def cmd_audit(args) -> int:
    from .audit import audit
    from .report import dump_json, write_text

    result = audit(args.path_a, args.path_u, args.path_v, args.path_b, args.path_x,
                   tol=args.tol, max_ir=args.max_ir)
    text = dump_json(result)
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen(args) -> int:
    from .. import gallery
    from .audit import export_problem

    seed = default_seed() if args.seed is None else args.seed
    prob = gallery.generate(args.case, args.n, args.kappa, seed, mode=args.mode, bandwidth=args.bandwidth,
                            lower_bw=args.lower_bw, upper_bw=args.upper_bw, density=args.density,
                            dense=args.dense, measure_kappa_B=True)
    export_problem(prob, args.out)
    print(f"problem written to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    import warnings

    from ..factor import ExactlySingular, NearSingularWarning
    from ..gallery import GalleryError
    from ..matcore import DimensionError, MatrixMarketError
    from .audit import AuditInputError

    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "trace": cmd_trace, "audit": cmd_audit, "gen": cmd_gen}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NearSingularWarning)
            return handlers[args.command](args)
    except (ConfigError, GalleryError, MatrixMarketError, DimensionError, AuditInputError,
            ExactlySingular, FileNotFoundError) as exc:
        print(f"smir {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
