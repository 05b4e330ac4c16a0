"""Tests for the rnd command-line interface."""

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from lib.cli import EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, main
from lib.config import load_run_config
from lib.estimator import evaluate
from lib.experiments import estimate
from lib.kernels import read_sample_csv, write_sample_csv
from lib.persistence import load_model
from lib.synth import default_pair, draw


def printed(output, key):
    """Value of key=value in the printed summary."""
    for line in output.splitlines():
        for token in line.split():
            if token.startswith(f"{key}="):
                return token.split("=", 1)[1]
    raise AssertionError(f"{key} not printed")


@pytest.fixture
def tiny_csvs(tmp_path):
    """N = M = 3 fixture samples."""
    p_csv, q_csv = tmp_path / "p3.csv", tmp_path / "q3.csv"
    write_sample_csv(p_csv, draw(default_pair(), "p", 3, seed=21))
    write_sample_csv(q_csv, draw(default_pair(), "q", 3, seed=22))
    return p_csv, q_csv


class TestEstimate:
    """Tests for rnd estimate."""

    def test_model_round_trip(self, tiny_csvs, tmp_path, capsys):
        """The saved model evaluates bitwise equal to an in-memory fit."""
        p_csv, q_csv = tiny_csvs
        out = tmp_path / "run"
        assert main(["estimate", str(p_csv), str(q_csv), "--out", str(out)]) == EXIT_OK
        model_path = out / "model.json"
        assert printed(capsys.readouterr().out, "model") == str(model_path)

        xp, xq = read_sample_csv(p_csv), read_sample_csv(q_csv, label="q")
        in_memory = estimate(load_run_config(), xp, xq, plan_seed=0).model
        queries = np.linspace(-3, 3, 41)
        assert np.array_equal(evaluate(load_model(model_path), queries), evaluate(in_memory, queries))

    def test_summary_line(self, sample_csvs, tmp_path, capsys):
        """The summary prints alpha, m and the cost ledger."""
        p_csv, q_csv = sample_csvs
        main(["estimate", str(p_csv), str(q_csv), "--out", str(tmp_path / "run")])
        output = capsys.readouterr().out
        assert float(printed(output, "alpha")) > 0
        assert 1 <= int(printed(output, "m")) <= 30
        assert int(printed(output, "kernel_evals")) > 0
        assert int(printed(output, "solver_flops")) > 0

    def test_large_alpha(self, sample_csvs, tmp_path, capsys):
        """alpha = 1e6 shrinks the estimate below 1e-3."""
        p_csv, q_csv = sample_csvs
        code = main(["estimate", str(p_csv), str(q_csv), "--alpha", "1e6", "--out", str(tmp_path / "run")])
        assert code == EXIT_OK
        output = capsys.readouterr().out
        assert float(printed(output, "alpha")) == 1e6
        assert float(printed(output, "max_abs_beta")) <= 1e-3

    def test_full_matches_identity_subsample(self, sample_csvs, tmp_path):
        """--full and a full-size subsample give the same coefficients."""
        p_csv, q_csv = sample_csvs
        full_dir, nys_dir = tmp_path / "full", tmp_path / "nys"
        main(["estimate", str(p_csv), str(q_csv), "--full", "--alpha", "0.1", "--out", str(full_dir)])
        main(["estimate", str(p_csv), str(q_csv), "--subsample", "30", "--alpha", "0.1", "--out", str(nys_dir)])
        full = json.loads((full_dir / "model.json").read_text())
        nys = json.loads((nys_dir / "model.json").read_text())
        assert full["mode"] == "full"
        assert nys["mode"] == "nystrom"
        assert np.allclose(full["c"], nys["c"], rtol=0, atol=1e-10)

    def test_missing_csv(self, tmp_path, capsys):
        """A missing sample file exits 1 with an error message."""
        code = main(["estimate", str(tmp_path / "p.csv"), str(tmp_path / "q.csv"), "--out", str(tmp_path)])
        assert code == EXIT_ERROR
        assert "Error:" in capsys.readouterr().err

    def test_malformed_csv(self, sample_csvs, tmp_path, capsys):
        """A non-numeric cell exits 1 and names the problem."""
        p_csv, _ = sample_csvs
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0\nabc\n")
        assert main(["estimate", str(p_csv), str(bad), "--out", str(tmp_path)]) == EXIT_ERROR
        assert "non-numeric" in capsys.readouterr().err

    def test_dimension_mismatch(self, sample_csvs, tmp_path, capsys):
        """Samples of different dimension exit 1."""
        p_csv, _ = sample_csvs
        wide = tmp_path / "wide.csv"
        wide.write_text("x0,x1\n0.1,0.2\n0.3,0.4\n")
        assert main(["estimate", str(p_csv), str(wide), "--out", str(tmp_path)]) == EXIT_ERROR
        assert "Dimension mismatch" in capsys.readouterr().err

    def test_wrong_input_count(self, sample_csvs):
        """estimate needs two sample files."""
        with pytest.raises(SystemExit):
            main(["estimate", str(sample_csvs[0])])


class TestOtherCommands:
    """Tests for evaluate, effdim, sample, presets and bench."""

    def test_evaluate(self, sample_csvs, tmp_path):
        """evaluate writes one beta per point, equal to the in-memory evaluation."""
        p_csv, q_csv = sample_csvs
        run = tmp_path / "run"
        main(["estimate", str(p_csv), str(q_csv), "--out", str(run)])
        code = main(["evaluate", "--model", str(run / "model.json"), "--points", str(p_csv), "--out", str(run)])
        assert code == EXIT_OK
        with open(run / "evaluate.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 30
        model = load_model(run / "model.json")
        expected = evaluate(model, read_sample_csv(p_csv))
        assert [float(r["beta"]) for r in rows] == expected.tolist()

    def test_evaluate_missing_model(self, sample_csvs, tmp_path, capsys):
        """A missing model file exits 1."""
        code = main(["evaluate", "--model", str(tmp_path / "none.json"), "--points", str(sample_csvs[0])])
        assert code == EXIT_ERROR
        assert "Model file not found" in capsys.readouterr().err

    def test_effdim(self, sample_csvs, tmp_path, capsys):
        """effdim writes the profile and ends with alpha_star."""
        out = tmp_path / "eff"
        assert main(["effdim", str(sample_csvs[0]), "--out", str(out)]) == EXIT_OK
        lines = (out / "effdim.csv").read_text().splitlines()
        assert lines[0] == "alpha,n_eff,n_inf,ninf_ratio"
        assert lines[-1].startswith("# alpha_star=")
        assert len(lines) == 22
        alpha_star = float(lines[-1].split("=", 1)[1])
        assert alpha_star == float(printed(capsys.readouterr().out, "alpha_star"))

    def test_sample(self, tmp_path):
        """sample writes the seeded draw."""
        out = tmp_path / "data"
        assert main(["sample", "--which", "q", "--n", "50", "--seed", "3", "--out", str(out)]) == EXIT_OK
        sample = read_sample_csv(out / "sample_q.csv")
        assert np.array_equal(sample.points, draw(default_pair(), "q", 50, seed=3).points)

    def test_sample_builtin_pair(self, tmp_path):
        """sample accepts a built-in pair by name."""
        out = tmp_path / "data"
        main(["sample", "--pair", "mixture_vs_gauss", "--which", "q", "--n", "20", "--out", str(out)])
        assert read_sample_csv(out / "sample_q.csv").n == 20

    def test_presets(self, capsys):
        """presets lists every packaged preset."""
        assert main(["presets"]) == EXIT_OK
        output = capsys.readouterr().out
        for name in ("default", "smoke", "convergence", "bench"):
            assert name in output

    def test_unknown_preset(self, capsys):
        """Unknown presets exit 1 and list the available ones."""
        assert main(["bench", "--preset", "nonexistent"]) == EXIT_ERROR
        assert "Available presets" in capsys.readouterr().err

    def test_config_and_preset_exclusive(self, tmp_path, capsys):
        """--config and --preset cannot be combined."""
        config = tmp_path / "run.yaml"
        config.write_text("seeds: [1]\n")
        assert main(["bench", "--config", str(config), "--preset", "smoke"]) == EXIT_ERROR

    def test_invalid_override(self, sample_csvs, capsys):
        """Invalid override values exit 1."""
        assert main(["effdim", str(sample_csvs[0]), "--s", "0.9"]) == EXIT_ERROR
        assert "Error:" in capsys.readouterr().err

    def test_bench(self, tmp_path, capsys):
        """bench on the smoke preset writes the CSV and the report."""
        out = tmp_path / "bench"
        assert main(["bench", "--preset", "smoke", "--out", str(out)]) == EXIT_OK
        assert (out / "bench.csv").exists()
        assert (out / "report.md").exists()
        assert float(printed(capsys.readouterr().out, "full_exponent")) > 2.5

    def test_convergence_partial_exit(self, tmp_path, capsys):
        """Failing convergence rows exit 2 and still write the CSV."""
        config = tmp_path / "run.yaml"
        config.write_text(
            "grid: [[20, 20]]\nseeds: [0]\nkernel:\n  family: polynomial\n  domain_radius: 0.01\n"
        )
        out = tmp_path / "conv"
        assert main(["convergence", "--config", str(config), "--out", str(out)]) == EXIT_PARTIAL
        assert (out / "convergence.csv").exists()
        assert "1 row(s) failed" in capsys.readouterr().out

    def test_bench_partial_exit(self, tmp_path, capsys):
        """A full size above max_full_n exits 2 and still writes the CSV."""
        config = tmp_path / "run.yaml"
        config.write_text(
            "bench:\n  nystrom_sizes: [200, 400]\n  full_sizes: [50, 100]\n  max_full_n: 60\n"
        )
        out = tmp_path / "bench"
        assert main(["bench", "--config", str(config), "--out", str(out)]) == EXIT_PARTIAL
        assert (out / "bench.csv").exists()
        output = capsys.readouterr().out
        assert "exceeds the configured full cap 60" in output
        assert "1 row(s) failed" in output


class TestScript:
    """End-to-end runs of the rnd.py launcher."""

    def _run(self, python_exe, rnd_script, *args, cwd):
        return subprocess.run(
            [python_exe, str(rnd_script), *args],
            capture_output=True,
            text=True,
            cwd=cwd,
        )

    def test_version(self, python_exe, rnd_script, tmp_path):
        """--version prints the program name."""
        result = self._run(python_exe, rnd_script, "--version", cwd=tmp_path)
        assert result.returncode == 0
        assert "rnd" in result.stdout

    def test_convergence_smoke(self, python_exe, rnd_script, tmp_path):
        """convergence on the smoke preset writes rows, summaries and a report."""
        out = tmp_path / "conv"
        result = self._run(
            python_exe, rnd_script, "convergence", "--preset", "smoke", "--out", str(out), cwd=tmp_path
        )
        assert result.returncode == 0, result.stderr
        with open(out / "convergence.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 2 * 2 + 2
        assert "slope=" in result.stdout
        report = (out / "report.md").read_text()
        assert "smoke" in report

    def test_error_exit(self, python_exe, rnd_script, tmp_path):
        """Errors exit 1 through the launcher."""
        result = self._run(python_exe, rnd_script, "effdim", "missing.csv", cwd=tmp_path)
        assert result.returncode == 1
        assert "Error:" in result.stderr
