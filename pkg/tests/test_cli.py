"""Command-line driver: exit codes, artifacts, reproducibility."""

import csv
import json
import os

import pytest
from click.testing import CliRunner

from skewdiff.cli import _resolve_threads, main
from skewdiff.errors import ConfigInvalid, UnknownKind
from skewdiff.experiments import (
    EXPERIMENTS,
    default_config,
    emit_plot_data,
    normalize_config,
    run_experiment,
)


def _write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


SMALL_CIR = {
    "experiment": "cir-baseline",
    "seed": 7,
    "n_paths": 6000,
    "grid": {"T": 1.0, "n_steps": 256},
}

SMALL_STATIONARY = {
    "experiment": "stationary-skew",
    "seed": 3,
    "grid": {"T": 200.0, "n_steps": 200 * 256},
}


class TestListExperiments:
    def test_prints_all_names(self):
        result = CliRunner().invoke(main, ["list-experiments"])
        assert result.exit_code == 0
        assert result.output.split() == EXPERIMENTS


class TestValidate:
    def test_valid_config(self, tmp_path):
        path = _write_config(tmp_path, SMALL_CIR)
        result = CliRunner().invoke(main, ["validate", "--config", path])
        assert result.exit_code == 0
        assert result.output.startswith("ok: cir-baseline")

    def test_schema_violation_exits_two(self, tmp_path):
        path = _write_config(tmp_path, {"experiment": "no-such", "seed": 0})
        result = CliRunner().invoke(main, ["validate", "--config", path])
        assert result.exit_code == 2

    def test_degenerate_skew_parameter_exits_two(self, tmp_path):
        cfg = dict(SMALL_CIR, params={"sigma": 2.0, "delta": 3.0, "b": 1.0,
                                      "p": 1.2})
        path = _write_config(tmp_path, cfg)
        result = CliRunner().invoke(main, ["validate", "--config", path])
        assert result.exit_code == 2
        assert "identically zero" in result.stderr

    def test_missing_file_exits_two(self, tmp_path):
        result = CliRunner().invoke(
            main, ["validate", "--config", str(tmp_path / "nope.json")])
        assert result.exit_code == 2

    def test_malformed_json_exits_two(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        result = CliRunner().invoke(main, ["validate", "--config", str(path)])
        assert result.exit_code == 2


class TestRun:
    def test_success_writes_report_and_status_lines(self, tmp_path):
        cfg_path = _write_config(tmp_path, SMALL_CIR)
        out = tmp_path / "out"
        result = CliRunner().invoke(
            main, ["run", "--config", cfg_path, "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "[PASS]" in result.output and "tolerance:" in result.output
        report = json.loads((out / "report.json").read_text())
        assert report["experiment"] == "cir-baseline"
        assert report["passed"] is True
        assert "mean_estimate" in report["metrics"]

    def test_unmet_criteria_exit_one(self, tmp_path):
        cfg = {
            "experiment": "skew-occupation",
            "seed": 1,
            "n_paths": 2000,
            "grid": {"T": 0.01, "n_steps": 16},
            "options": {"atol": 1e-9},
        }
        cfg_path = _write_config(tmp_path, cfg)
        out = tmp_path / "out"
        result = CliRunner().invoke(
            main, ["run", "--config", cfg_path, "--out", str(out)])
        assert result.exit_code == 1
        assert "[FAIL]" in result.output
        assert (out / "report.json").exists()

    def test_invalid_config_exit_two(self, tmp_path):
        cfg_path = _write_config(tmp_path, {"experiment": "cir-baseline",
                                            "seed": -1})
        result = CliRunner().invoke(
            main, ["run", "--config", cfg_path, "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_runtime_failure_exit_three(self, tmp_path):
        # horizon far too short for the thinning: no usable samples remain
        cfg = {
            "experiment": "stationary-skew",
            "seed": 0,
            "grid": {"T": 1.0, "n_steps": 256},
        }
        cfg_path = _write_config(tmp_path, cfg)
        result = CliRunner().invoke(
            main, ["run", "--config", cfg_path, "--out", str(tmp_path)])
        assert result.exit_code == 3
        assert "runtime failure" in result.stderr

    def test_seed_override(self, tmp_path):
        cfg_path = _write_config(tmp_path, SMALL_CIR)
        outs = {}
        for seed in (7, 8):
            out = tmp_path / f"seed{seed}"
            result = CliRunner().invoke(
                main, ["run", "--config", cfg_path, "--seed", str(seed),
                       "--out", str(out)])
            assert result.exit_code == 0
            outs[seed] = json.loads((out / "report.json").read_text())
        assert outs[7]["config"]["seed"] == 7
        assert outs[8]["config"]["seed"] == 8
        assert (outs[7]["metrics"]["mean_estimate"]["value"]
                != outs[8]["metrics"]["mean_estimate"]["value"])

    def test_plot_csv_written(self, tmp_path):
        cfg_path = _write_config(tmp_path, SMALL_STATIONARY)
        out = tmp_path / "out"
        CliRunner().invoke(main, ["run", "--config", cfg_path,
                                  "--out", str(out)])
        with open(out / "stationary-hist.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "empirical", "target"]
        assert len(rows) == 61
        float(rows[1][0])  # numeric payload


class TestThreadReproducibility:
    def test_reports_identical_across_thread_counts(self, tmp_path):
        cfg_path = _write_config(tmp_path, SMALL_CIR)
        dumps = {}
        for threads in (1, 3):
            out = tmp_path / f"t{threads}"
            result = CliRunner().invoke(
                main, ["run", "--config", cfg_path, "--threads", str(threads),
                       "--out", str(out)])
            assert result.exit_code == 0
            report = json.loads((out / "report.json").read_text())
            report.pop("runtime_seconds")
            dumps[threads] = json.dumps(report, sort_keys=True)
        assert dumps[1] == dumps[3]

    def test_env_variable_parsed(self, monkeypatch):
        monkeypatch.delenv("SKEWDIFF_THREADS", raising=False)
        assert _resolve_threads(None) == 1
        assert _resolve_threads(4) == 4
        monkeypatch.setenv("SKEWDIFF_THREADS", "6")
        assert _resolve_threads(None) == 6
        assert _resolve_threads(2) == 2
        monkeypatch.setenv("SKEWDIFF_THREADS", "many")
        with pytest.raises(ConfigInvalid):
            _resolve_threads(None)


class TestPlotData:
    def test_unknown_kind_rejected(self, tmp_path):
        bundle = run_experiment(default_config("regime-check", seed=0))
        with pytest.raises(UnknownKind):
            emit_plot_data(bundle, "bogus-kind", str(tmp_path))
        with pytest.raises(UnknownKind):
            # known kind, but this experiment produces no such table
            emit_plot_data(bundle, "localtime", str(tmp_path))

    def test_normalize_merges_defaults(self):
        cfg = normalize_config(dict(SMALL_CIR))
        assert cfg["params"]["delta"] == 3.0
        assert cfg["n_paths"] == 6000
        assert cfg["grid"]["n_steps"] == 256
