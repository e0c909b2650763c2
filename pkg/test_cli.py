#!/usr/bin/env python3
"""
Tests for the command line: exit codes, scenario files, traces, comparisons.
"""

import os
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

import cli
from errors import RunAbortedError, UsageError
from mpc_loop import run_basic
from trace_io import read_trace

REPO = Path(__file__).resolve().parent
LQ_RUN = ["run", "--system", "linear_scalar", "--x0", "1", "--N", "5", "--alpha-bar", "0.3",
          "--algorithm", "basic"]


def _scenario(path: Path, **values) -> Path:
    lines = ["# generated for tests"] + [f"{key}={value}" for key, value in values.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestRun:
    def test_certified_lq_run(self, tmp_path, capsys):
        out = tmp_path / "lq.csv"
        assert cli.main(LQ_RUN + ["--output", str(out)]) == cli.EXIT_OK
        printed = capsys.readouterr().out
        assert "Telescoping certificate: holds" in printed
        assert "✅ alpha V_inf <= alpha J <= V_N(x0) <= V_inf" in printed

        header = out.read_text().splitlines()[0]
        assert header == "step,time,x1,u1,stage_cost,event,m_n,alpha_local,warning,update_j"
        totals = read_trace(out)
        assert totals.warning_count == 0
        assert totals.schedule == list(range(len(totals.frame) + 1))

    def test_warning_exit_code(self, tmp_path, capsys):
        out = tmp_path / "warn.csv"
        argv = ["run", "--system", "linear_scalar", "--x0", "1", "--N", "2", "--alpha-bar", "0.3",
                "--steps", "3", "--stop-tol", "none", "--output", str(out)]
        assert cli.main(argv) == cli.EXIT_WARNING
        assert "Solution may diverge" in capsys.readouterr().out
        assert read_trace(out).warning_count == 3

    @pytest.mark.parametrize("flag,value,field", [
        ("--alpha-bar", "1.5", "alpha_bar"),
        ("--N", "1", "N"),
        ("--N", "five", "N"),
        ("--algorithm", "fast", "algorithm"),
        ("--x0", "1,2", "x0"),
        ("--b", "0", "b"),
    ])
    def test_bad_values_name_the_field(self, tmp_path, capsys, flag, value, field):
        argv = ["run", "--system", "linear_scalar", "--output", str(tmp_path / "x.csv"), flag, value]
        assert cli.main(argv) == cli.EXIT_ERROR
        assert f"{field}:" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert cli.main(["run", "--horizon", "5"]) == cli.EXIT_ERROR
        assert "Usage error" in capsys.readouterr().err

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NMPC_OUTPUT_DIR", str(tmp_path / "env"))
        assert cli.main(LQ_RUN) == cli.EXIT_OK
        assert (tmp_path / "env" / "linear_scalar_basic_N5.csv").exists()

    def test_abort_keeps_partial_trace(self, tmp_path, monkeypatch, lq, capsys):
        partial = run_basic(lq, [1.0], 5, 0.3, steps=2, stop_tol=None)

        def aborting(*args, **kwargs):
            raise RunAbortedError("state diverged", log=partial, index=2)

        monkeypatch.setattr(cli, "run_algorithm", aborting)
        out = tmp_path / "partial.csv"
        assert cli.main(LQ_RUN + ["--output", str(out)]) == cli.EXIT_ERROR
        assert len(read_trace(out).frame) == 2
        assert "state diverged" in capsys.readouterr().out


class TestScenarioFiles:
    def test_flags_override_file(self, tmp_path):
        path = _scenario(tmp_path / "lq.env", system="linear_scalar", N=4, alpha_bar=0.4, x0="0.5")
        config = cli.resolve_config(str(path), {"N": "6"})
        assert config.N == 6
        assert config.alpha_bar == 0.4
        assert config.x0 == (0.5,)

    def test_syncgen_defaults(self):
        config = cli.build_config({})
        assert config.system == "syncgen"
        assert config.x0 == (1.02, 0.1, 1.014)
        assert config.T == 0.1
        assert config.lam == 1e-6

    def test_unknown_key(self, tmp_path):
        path = _scenario(tmp_path / "bad.env", system="linear_scalar", horizon=5)
        with pytest.raises(UsageError) as info:
            cli.load_scenario(path)
        assert info.value.field == "horizon"

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError):
            cli.load_scenario(tmp_path / "absent.env")

    def test_stop_tolerance_can_be_disabled(self):
        assert cli.build_config({"stop_tol": "none"}).stop_tol is None
        assert cli.build_config({"stop_tol": "1e-3"}).stop_tol == 1e-3


class TestAlphaCommands:
    def test_alpha_table(self, tmp_path):
        out = tmp_path / "alpha.csv"
        argv = ["alpha-table", "--C", "4", "--sigma", "0.6", "--N-max", "15", "--output", str(out)]
        assert cli.main(argv) == cli.EXIT_OK
        table = pd.read_csv(out)
        assert list(table.columns) == ["N", "m", "alpha"]
        row = table[(table["N"] == 15) & (table["m"] == 6)]
        assert row["alpha"].iloc[0] == pytest.approx(0.294, abs=0.005)
        assert table[(table["m"] == 1) & (table["alpha"] >= 0.275)]["N"].min() == 25

    def test_alpha_table_unit_overshoot(self, tmp_path):
        out = tmp_path / "alpha1.csv"
        assert cli.main(["alpha-table", "--C", "1", "--sigma", "0.5", "--N-max", "6", "--output", str(out)]) == 0
        table = pd.read_csv(out)
        expected = 1.0 - 0.5 ** table["N"]
        assert (table["alpha"] - expected).abs().max() <= 1e-12

    def test_alpha_table_rejects_bad_constants(self, tmp_path, capsys):
        assert cli.main(["alpha-table", "--C", "0.5", "--output", str(tmp_path / "a.csv")]) == cli.EXIT_ERROR
        assert "C:" in capsys.readouterr().err

    def test_min_horizon(self, capsys):
        assert cli.main(["min-horizon", "--alpha-bar", "0.275", "--m", "1"]) == cli.EXIT_OK
        assert "N = 25" in capsys.readouterr().out
        assert cli.main(["min-horizon", "--alpha-bar", "0.275"]) == cli.EXIT_OK
        assert "N = 15" in capsys.readouterr().out

    def test_min_horizon_unreachable(self):
        argv = ["min-horizon", "--C", "10", "--sigma", "0.9", "--alpha-bar", "0.999", "--m", "1", "--cap", "40"]
        assert cli.main(argv) == cli.EXIT_ERROR


class TestCompare:
    def test_identical_scenarios(self, tmp_path, capsys):
        a = _scenario(tmp_path / "a.env", system="linear_scalar", N=5, alpha_bar=0.3, x0=1)
        b = _scenario(tmp_path / "b.env", system="linear_scalar", N=5, alpha_bar=0.3, x0=1)
        out = tmp_path / "compare.csv"
        assert cli.main(["compare", str(a), str(b), "--parallel", "--output", str(out)]) == cli.EXIT_OK
        assert "Cost ratio B/A: 1.000000" in capsys.readouterr().out
        report = pd.read_csv(out)
        assert report["schedule"].iloc[0] == report["schedule"].iloc[1]

    def test_mismatched_systems(self, tmp_path, capsys):
        a = _scenario(tmp_path / "a.env", system="linear_scalar", N=5)
        b = _scenario(tmp_path / "b.env", system="syncgen", N=5)
        assert cli.main(["compare", str(a), str(b)]) == cli.EXIT_ERROR
        assert "system:" in capsys.readouterr().err

    def test_abort_keeps_partial_trace(self, tmp_path, monkeypatch, lq, capsys):
        partial = run_basic(lq, [1.0], 5, 0.3, steps=2, stop_tol=None)

        def aborting(*args, **kwargs):
            raise RunAbortedError("state diverged", log=partial, index=2)

        monkeypatch.setattr(cli, "run_algorithm", aborting)
        monkeypatch.setenv("NMPC_OUTPUT_DIR", str(tmp_path))
        a = _scenario(tmp_path / "a.env", system="linear_scalar", N=5, alpha_bar=0.3, x0=1)
        b = _scenario(tmp_path / "b.env", system="linear_scalar", N=6, alpha_bar=0.3, x0=1)
        out = tmp_path / "compare.csv"
        assert cli.main(["compare", str(a), str(b), "--output", str(out)]) == cli.EXIT_ERROR
        trace = tmp_path / "linear_scalar_basic_N5.csv"
        assert len(read_trace(trace).frame) == 2
        assert "state diverged" in capsys.readouterr().out
        assert not out.exists()


class TestScan:
    def test_lq_scan_finds_two_step_violations(self, tmp_path, capsys):
        out = tmp_path / "scan.csv"
        argv = ["scan", "--system", "linear_scalar", "--x0", "1", "--alpha-bar", "0.3",
                "--algorithm", "classical", "--steps", "4", "--stop-tol", "none",
                "--N-min", "2", "--N-max", "5", "--output", str(out)]
        assert cli.main(argv) == cli.EXIT_OK
        assert "Largest horizon with a violation: N = 2" in capsys.readouterr().out
        report = pd.read_csv(out)
        assert report["N"].tolist() == [5, 4, 3, 2]
        assert report["violations"].tolist() == [0, 0, 0, 4]
        assert report["smallest_alpha"].iloc[-1] == pytest.approx(0.0, abs=1e-4)
        assert (report["smallest_alpha"].iloc[:3] > 0.9).all()

    def test_first_only_stops_at_largest_violating_horizon(self, tmp_path, capsys):
        out = tmp_path / "scan.csv"
        argv = ["scan", "--system", "linear_scalar", "--x0", "1", "--alpha-bar", "0.3",
                "--algorithm", "classical", "--steps", "3", "--stop-tol", "none",
                "--N", "3", "--N-min", "2", "--first-only", "--output", str(out)]
        assert cli.main(argv) == cli.EXIT_OK
        assert pd.read_csv(out)["N"].tolist() == [3, 2]

    def test_bad_range(self, capsys):
        argv = ["scan", "--system", "linear_scalar", "--N-min", "6", "--N-max", "4"]
        assert cli.main(argv) == cli.EXIT_ERROR
        assert "N_max" in capsys.readouterr().err


def test_repeated_runs_write_identical_traces(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        subprocess.run([sys.executable, str(REPO / "cli.py"), "--quiet"] + LQ_RUN + ["--output", str(out)],
                       cwd=REPO, check=True, capture_output=True,
                       env={**os.environ, "PYTHONIOENCODING": "utf-8"})
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
