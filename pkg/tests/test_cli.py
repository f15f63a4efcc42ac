import json

import numpy as np
import pytest

from smir import gallery
from smir.cli import main, parse_float
from smir.cli.audit import export_problem
from smir.cli.experiment import TRIAL_COLUMNS, ExperimentConfig, run_experiment
from smir.cli.report import read_csv, summarize
from smir.factor import factor
from smir.matcore import EPS, write_vector
from smir.smsolver import sm_ir_solve
from smir.stability import error_report

SMALL = ["--case", "1i", "--n", "40", "--kappa", "1e6,1e10", "--seeds", "2", "--seed", "3"]


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_parse_float():
    assert parse_float("5eps") == 5 * EPS
    assert parse_float("eps") == EPS
    assert parse_float("1e-3") == 1e-3


def test_run_writes_outputs_deterministically(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", *SMALL, "--out", str(a)]) == 0
    assert main(["run", *SMALL, "--out", str(b)]) == 0
    for name in ("trials.csv", "summary.json", "normwise_berr.svg", "ir_steps.svg"):
        assert read_bytes(a / name) == read_bytes(b / name), name
    rows = read_csv(a / "trials.csv")
    assert list(rows[0]) == TRIAL_COLUMNS
    assert len(rows) == 2 * 2 * 3
    assert {r["method"] for r in rows} == {"SM-LU", "SM-LU-IR", "GEPP-on-B"}
    assert all(r["status"] == "ok" for r in rows)
    summary = json.loads((a / "summary.json").read_text())
    assert summary == json.loads(json.dumps(summarize(rows)))


def test_seed_from_environment(tmp_path, monkeypatch):
    args = ["run", "--case", "4", "--n", "30", "--kappa", "10", "--seeds", "1", "--no-plots"]
    monkeypatch.setenv("RANK1_SEED", "17")
    assert main([*args, "--out", str(tmp_path / "env")]) == 0
    assert main([*args, "--seed", "17", "--out", str(tmp_path / "flag")]) == 0
    assert read_bytes(tmp_path / "env" / "trials.csv") == read_bytes(tmp_path / "flag" / "trials.csv")
    assert read_csv(tmp_path / "env" / "trials.csv")[0]["seed"] == "17"
    monkeypatch.setenv("RANK1_SEED", "abc")
    assert main([*args, "--out", str(tmp_path / "bad")]) == 1


@pytest.mark.parametrize("argv", [
    ["run", "--case", "9", "--out", "x"],
    ["run", "--case", "1i", "--methods", "cholesky", "--out", "x"],
    ["run", "--case", "1i", "--mode", "4", "--n", "10", "--out", "x"],
    ["run", "--case", "1i", "--n", "0", "--out", "x"],
    ["frobnicate"],
])
def test_config_errors_exit_1(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as info:
        code = main(argv)
        raise SystemExit(code)
    assert info.value.code == 1


def test_partial_failure_exits_2(tmp_path):
    # density 0.01 asks for fewer nonzeros than a 40x40 diagonal has, so generation fails per trial
    code = main(["run", "--case", "4", "--n", "40", "--kappa", "1e3", "--seeds", "1", "--density", "0.01",
                 "--no-plots", "--out", str(tmp_path)])
    assert code == 2
    rows = read_csv(tmp_path / "trials.csv")
    assert rows and all(r["status"] == "error" for r in rows)


def test_trace(tmp_path):
    assert main(["trace", *SMALL, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "ir_trace.csv")
    assert {r["step"] for r in rows} >= {"0", "1"}
    assert (tmp_path / "trace_k1e+06_s3.svg").exists()


def test_trace_zero_update_has_no_steps():
    from smir.smsolver import RankOneSystem

    prob = gallery.generate("4", 30, 10.0, seed=0)
    sys = RankOneSystem(prob.A, np.zeros(30), prob.v, prob.b)
    rep = sm_ir_solve(sys, factor(prob.A))
    assert rep.ir_trace.step_count == 0


class TestAudit:
    def test_roundtrip(self, tmp_path):
        prob = gallery.generate("1i", 60, 1e8, seed=4)
        rep = sm_ir_solve(prob.sys, factor(prob.A))
        expected = error_report(prob.sys, rep.solution, prob.x_ref)
        export_problem(prob, tmp_path)
        write_vector(rep.solution, tmp_path / "x.mtx")
        out = tmp_path / "audit.json"
        files = [f"--{k}={tmp_path / (k + '.mtx')}" for k in ("A", "u", "v", "b", "x")]
        assert main(["audit", *files, "--out", str(out)]) == 0
        got = json.loads(out.read_text())
        assert got["solution_source"] == "file"
        for key in ("normwise_berr", "componentwise_berr"):
            assert got["error_report"][key] == pytest.approx(getattr(expected, key), rel=1e-12, abs=0)
        assert got["rigal_gaches"]["passed"]

    def test_solve_when_no_x(self, tmp_path, capsys):
        prob = gallery.generate("1i", 40, 1e8, seed=1)
        export_problem(prob, tmp_path)
        files = [f"--{k}={tmp_path / (k + '.mtx')}" for k in ("A", "u", "v", "b")]
        assert main(["audit", *files]) == 0
        got = json.loads(capsys.readouterr().out)
        assert got["solution_source"] == "SM-LU-IR"
        assert got["ir"]["converged"]
        assert got["error_report"]["normwise_berr"] < 5 * EPS

    def test_zero_update_is_plain_solve(self, tmp_path, capsys):
        prob = gallery.generate("4", 30, 10.0, seed=2)
        export_problem(prob, tmp_path)
        write_vector(np.zeros(30), tmp_path / "u.mtx")
        files = [f"--{k}={tmp_path / (k + '.mtx')}" for k in ("A", "u", "v", "b")]
        assert main(["audit", *files]) == 0
        got = json.loads(capsys.readouterr().out)
        assert got["ir"]["steps"] == 0
        assert got["bound_report"]["one_step_ratio"] is None

    def test_mismatched_dimensions(self, tmp_path, capsys):
        prob = gallery.generate("4", 30, 10.0, seed=2)
        export_problem(prob, tmp_path)
        write_vector(np.ones(29), tmp_path / "u.mtx")
        files = [f"--{k}={tmp_path / (k + '.mtx')}" for k in ("A", "u", "v", "b")]
        assert main(["audit", *files]) == 1
        assert "u has length 29" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        files = [f"--{k}={tmp_path / (k + '.mtx')}" for k in ("A", "u", "v", "b")]
        assert main(["audit", *files]) == 1


def test_gen(tmp_path):
    assert main(["gen", "--case", "3", "--n", "50", "--kappa", "1e7", "--seed", "5", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["case"] == "3" and manifest["seed"] == 5
    assert manifest["kappa_B_measured"] <= 1e3


def test_runner_records_errors_without_aborting():
    cfg = ExperimentConfig(case="4", n=30, kappas=[1e3], seeds=2, density=0.01, methods=["SM-LU"])
    records, _ = run_experiment(cfg)
    assert len(records) == 2 and all(r["status"] == "error" for r in records)
