"""Command-line behavior: outputs, determinism, exit codes."""

from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from pdrtest import design, generate
from pdrtest.cli import EXIT_DATA, EXIT_IO, EXIT_OK, main


def write_dataset_csv(path, ds):
    header = [ds.column_names.y, *ds.column_names.x, *ds.column_names.w]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            cells = [ds.y[i], *ds.x[i], *ds.w[i]]
            writer.writerow([repr(float(v)) for v in cells])
    return str(path)


@pytest.fixture
def ex1_file(tmp_path):
    ds = generate(design("ex1", 400, 0.0), np.random.default_rng(31))
    return write_dataset_csv(tmp_path / "ex1.csv", ds)


class TestCmdTest:
    def test_boston_preset_json(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main([
            "test", "--preset", "boston", "--family", "linear+w",
            "--mc-reps", "200", "--seed", "3", "--format", "json", "--out", str(out),
        ])
        assert code == EXIT_OK
        record = json.loads(out.read_text())
        assert record["q_hat"] == 2
        assert record["p_hat"] <= 0.01
        assert record["config"]["m"] == 200
        assert record["config"]["seed"] == 3
        assert len(record["b_columns"]) == 2

    def test_same_seed_byte_identical_reports(self, tmp_path):
        args = [
            "test", "--preset", "boston", "--family", "linear+w",
            "--mc-reps", "100", "--seed", "11", "--format", "json",
        ]
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        assert main([*args, "--out", str(out1)]) == EXIT_OK
        assert main([*args, "--out", str(out2)]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_text_and_json_share_values(self, tmp_path, capsys):
        args = [
            "test", "--preset", "boston", "--family", "linear+w",
            "--mc-reps", "100", "--seed", "11",
        ]
        assert main([*args, "--format", "text"]) == EXIT_OK
        text = capsys.readouterr().out
        assert main([*args, "--format", "json"]) == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        for key in ("t_n", "p_hat"):
            wanted = repr(record[key])
            assert any(wanted in line for line in text.splitlines()), (key, wanted)

    def test_generated_seed_is_printed(self, ex1_file, capsys):
        code = main(["test", "--data", ex1_file, "--y", "y",
                     "--x", "x1,x2,x3,x4", "--mc-reps", "50"])
        assert code == EXIT_OK
        assert "seed" in capsys.readouterr().out

    def test_missing_column_names_it(self, ex1_file, capsys):
        code = main(["test", "--data", ex1_file, "--y", "price",
                     "--x", "x1,x2,x3,x4", "--mc-reps", "20", "--seed", "1"])
        assert code == EXIT_DATA
        assert "price" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        code = main(["test", "--data", "/nonexistent/data.csv", "--y", "y",
                     "--x", "x1", "--mc-reps", "20", "--seed", "1"])
        assert code == EXIT_IO

    def test_bad_alpha_is_config_error(self, ex1_file, capsys):
        code = main(["test", "--data", ex1_file, "--y", "y", "--x", "x1,x2,x3,x4",
                     "--alpha", "1.5", "--mc-reps", "20", "--seed", "1"])
        assert code == EXIT_DATA
        assert "alpha" in capsys.readouterr().err

    def test_zero_replicates_is_config_error(self, ex1_file, capsys):
        code = main(["test", "--data", ex1_file, "--y", "y", "--x", "x1,x2,x3,x4",
                     "--mc-reps", "0", "--seed", "1"])
        assert code == EXIT_DATA

    def test_bad_worker_env_is_config_error(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("PDRTEST_WORKERS", "many")
        spec = tmp_path / "exp.txt"
        spec.write_text(
            "case = ex1\nn = 40\na = 0\nreps = 2\nmc_reps = 10\nalpha = 0.05\nseed = 5\n"
        )
        assert main(["simulate", "--spec", str(spec)]) == EXIT_DATA
        assert "PDRTEST_WORKERS" in capsys.readouterr().err

    def test_unknown_family(self, ex1_file, capsys):
        code = main(["test", "--data", ex1_file, "--y", "y",
                     "--x", "x1,x2,x3,x4", "--family", "quadratic",
                     "--mc-reps", "20", "--seed", "1"])
        assert code == EXIT_DATA
        assert "quadratic" in capsys.readouterr().err


class TestCmdDim:
    def test_boston_dimension(self, capsys):
        assert main(["dim", "--preset", "boston", "--format", "json"]) == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert record["q_hat"] == 2
        assert len(record["eigenvalues"]) == 11
        assert len(record["ridge_ratios"]) == 10

    def test_null_simulated_file_gives_one(self, ex1_file, capsys):
        assert main(["dim", "--data", ex1_file, "--y", "y", "--x", "x1,x2,x3,x4",
                     "--format", "json"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["q_hat"] == 1

    def test_ridge_override_flows_through(self, capsys):
        # a heavy ridge flattens the ratios, pushing the decision to 1
        assert main(["dim", "--preset", "boston", "--cn", "0.5",
                     "--format", "json"]) == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert record["c_n"] == 0.5
        assert record["q_hat"] == 1

    def test_single_column_always_one(self, tmp_path, capsys):
        rng = np.random.default_rng(32)
        path = tmp_path / "one.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y", "x1"])
            for _ in range(50):
                x = float(rng.standard_normal())
                writer.writerow([repr(float(np.sin(3 * x)) + 0.1 * float(rng.standard_normal())), repr(x)])
        assert main(["dim", "--data", str(path), "--y", "y", "--x", "x1",
                     "--format", "json"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["q_hat"] == 1


class TestCmdSimulate:
    def _spec(self, tmp_path, **overrides):
        entries = {
            "case": "ex1", "n": "40", "a": "0, 0.8", "reps": "4",
            "mc_reps": "25", "alpha": "0.05", "seed": "5",
        }
        entries.update(overrides)
        path = tmp_path / "exp.txt"
        path.write_text("".join(f"{k} = {v}\n" for k, v in entries.items()))
        return str(path)

    def test_writes_csv(self, tmp_path, capsys):
        spec = self._spec(tmp_path)
        out = tmp_path / "rates.csv"
        assert main(["simulate", "--spec", spec, "--out", str(out)]) == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "case,n,a,reps,mc_reps,alpha,rejection_rate,seed"
        assert len(lines) == 3

    def test_stdout_text_format(self, tmp_path, capsys):
        spec = self._spec(tmp_path)
        assert main(["simulate", "--spec", spec, "--format", "text"]) == EXIT_OK
        assert "rate" in capsys.readouterr().out

    def test_unknown_case_exits_nonzero(self, tmp_path, capsys):
        spec = self._spec(tmp_path, case="exo")
        assert main(["simulate", "--spec", spec]) == EXIT_DATA

    def test_missing_spec_file(self, capsys):
        assert main(["simulate", "--spec", "/nonexistent/exp.txt"]) == EXIT_IO


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "pdrtest.cli", "--help"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
