"""Validation suite behaviour and the CLI surface."""

import json
import re
from pathlib import Path

import yaml
from click.testing import CliRunner

from doseopt.cli import main
from doseopt.validation import run_all

TINY_CONFIG = {
    "scenario": {"suite": "seamless", "name": "sc1"},
    "design": {
        "phase1": {"target_tox_prob": 0.2, "max_n": 6},
        "phase2": {"cohort_size": 10, "max_n": 20, "bar_draws": 5000},
    },
    "mcmc": {"iterations": 300, "burnin": 150, "thin": 3},
    "replication": {"n_reps": 2, "master_seed": 42, "parallelism": 1},
}


class TestValidationSuite:
    def test_all_checks_pass(self):
        results = run_all()
        assert len(results) == 5
        for res in results:
            assert res.passed, res.line()

    def test_perturbation_fails_only_effect_check(self):
        from doseopt import pkpd

        def skewed(d, pk, pd):
            return pkpd.cumulative_effect(d, pk, pd) * (1 + 1e-6)

        results = run_all(effect_fn=skewed)
        by_name = {r.name: r.passed for r in results}
        assert not by_name["effect-closed-form-vs-quadrature"]
        failing = [n for n, ok in by_name.items() if not ok]
        assert failing == ["effect-closed-form-vs-quadrature"]

    def test_report_lines_have_observed_and_expected(self):
        for res in run_all():
            line = res.line()
            assert "observed" in line
            assert "expected" in line


class TestValidateCommand:
    def test_exit_zero_on_pristine_build(self):
        runner = CliRunner()
        result = runner.invoke(main, ["validate"])
        assert result.exit_code == 0, result.output
        assert result.output.count("[PASS]") == 5


class TestSimulateCommand:
    def write_config(self, tmp_path, doc=None) -> Path:
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump(doc or TINY_CONFIG))
        return path

    def test_writes_csv_and_manifest(self, tmp_path):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "out"
        runner = CliRunner()
        result = runner.invoke(main, ["simulate", "--config", str(cfg),
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        csv_path = out / "seamless-sc1.csv"
        assert csv_path.exists()
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == ("dose_index,dose_amount,true_tox,true_eff,"
                            "utility,avg_n,sel_pct,sel_pct_with_u")
        assert len(lines) == 7  # header + 5 doses + control
        assert lines[1].startswith("1,15,")
        assert lines[6].startswith("0,,")  # control row
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["master_seed"] == 42
        assert re.fullmatch(r"[0-9a-f]{64}", manifest["config_hash"])
        assert manifest["outputs"][0]["scenario"] == "seamless-sc1"

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = self.write_config(tmp_path)
        runner = CliRunner()
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            result = runner.invoke(main, ["simulate", "--config", str(cfg),
                                          "--out", str(out)])
            assert result.exit_code == 0, result.output
            outs.append((out / "seamless-sc1.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_invalid_config_nonzero_exit_names_field(self, tmp_path):
        doc = yaml.safe_load(yaml.safe_dump(TINY_CONFIG))
        del doc["replication"]["master_seed"]
        cfg = self.write_config(tmp_path, doc)
        runner = CliRunner()
        result = runner.invoke(main, ["simulate", "--config", str(cfg),
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 2
        assert "master_seed" in result.output

    def test_missing_config_file(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, ["simulate", "--config",
                                      str(tmp_path / "none.yaml"),
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code != 0
