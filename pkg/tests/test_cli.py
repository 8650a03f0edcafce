import json
import subprocess
import sys
from pathlib import Path

import pytest

WORKERS = Path(__file__).parent / "workers"


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "pitchgrad.cli", *args],
        capture_output=True, text=True, cwd=cwd, timeout=600)


COMMON = ["--n-samples", "4096"]


class TestList:
    def test_catalog_text(self):
        out = run_cli("list")
        assert out.returncode == 0
        assert "nmels=128, nmfcc=128, norm=None" in out.stdout
        names = [l.split()[0] for l in out.stdout.splitlines() if l.strip()]
        assert len(names) == 8
        assert "mss" in names and "ideal" in names

    def test_catalog_json(self):
        out = run_cli("list", "--format", "json")
        doc = json.loads(out.stdout)
        assert len(doc) == 8
        for entry in doc:
            assert set(entry) == {"name", "analyzer", "norm", "params"}


class TestTrials:
    def test_ideal_all_ones(self, tmp_path):
        out = run_cli("trials", "--spec", "ideal", "--seed", "7",
                      "--n-trials", "20", "--out", str(tmp_path), *COMMON)
        assert out.returncode == 0
        csv = (tmp_path / "trials.csv").read_text()
        lines = csv.splitlines()
        assert lines[0] == "spec,axis,mode,eps,n,accuracy,ci95"
        assert len(lines) == 7
        for line in lines[1:]:
            assert ",1.000000,0.000000" in line
        assert (tmp_path / "manifest.json").exists()

    def test_unknown_spec_usage_error(self, tmp_path):
        out = run_cli("trials", "--spec", "nope", "--out", str(tmp_path))
        assert out.returncode == 2

    def test_external_requires_cmd(self, tmp_path):
        out = run_cli("trials", "--spec", "external", "--out", str(tmp_path))
        assert out.returncode == 2

    def test_extern_handshake_failure_exit_code(self, tmp_path):
        worker = f"{sys.executable} {WORKERS / 'echo_l2_worker.py'} --version 2"
        out = run_cli("trials", "--spec", "external", "--extern-cmd", worker,
                      "--n-trials", "2", "--out", str(tmp_path), *COMMON)
        assert out.returncode == 3

    def test_extern_end_to_end(self, tmp_path):
        worker = f"{sys.executable} {WORKERS / 'echo_l2_worker.py'}"
        out = run_cli("trials", "--spec", "external", "--extern-cmd", worker,
                      "--n-trials", "5", "--seed", "7",
                      "--out", str(tmp_path), *COMMON)
        assert out.returncode == 0
        lines = (tmp_path / "trials.csv").read_text().splitlines()
        # analytic columns are skipped for external specs
        assert len(lines) == 5
        assert all(",numeric," in l for l in lines[1:])

    def test_byte_identical_across_runs_and_workers(self, tmp_path):
        csvs = []
        for i, workers in enumerate(("1", "4", "16")):
            out_dir = tmp_path / f"run{i}"
            out = run_cli("trials", "--spec", "spectrogram", "--spec", "ideal",
                          "--seed", "7", "--n-trials", "24",
                          "--workers", workers, "--out", str(out_dir), *COMMON)
            assert out.returncode == 0
            csvs.append((out_dir / "trials.csv").read_bytes())
        assert csvs[0] == csvs[1] == csvs[2]
        rerun_dir = tmp_path / "rerun"
        out = run_cli("trials", "--spec", "spectrogram", "--spec", "ideal",
                      "--seed", "7", "--n-trials", "24",
                      "--workers", "1", "--out", str(rerun_dir), *COMMON)
        assert (rerun_dir / "trials.csv").read_bytes() == csvs[0]

    def test_json_format(self, tmp_path):
        out = run_cli("trials", "--spec", "ideal", "--n-trials", "4",
                      "--format", "json", "--out", str(tmp_path), *COMMON)
        assert out.returncode == 0
        doc = json.loads((tmp_path / "trials.json").read_text())
        assert {r["spec"] for r in doc["reports"]} == {"ideal"}

    def test_config_file_with_flag_override(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({
            "spec": ["ideal"], "n_trials": 6, "seed": 3, "n_samples": 4096}))
        out_dir = tmp_path / "out"
        out = run_cli("trials", "--config", str(cfg_file), "--n-trials", "4",
                      "--out", str(out_dir))
        assert out.returncode == 0
        lines = (out_dir / "trials.csv").read_text().splitlines()
        assert lines[1].split(",")[4] == "4"  # flag wins over config


class TestManifest:
    def test_contents(self, tmp_path):
        run_cli("trials", "--spec", "ideal", "--seed", "11", "--n-trials", "3",
                "--out", str(tmp_path), *COMMON)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["specs"] == ["ideal"]
        assert doc["config"]["seed"] == 11
        assert doc["outputs"] == ["trials.csv"]
        assert "tool_version" in doc and "timestamp" in doc


class TestLandscapeCommands:
    def test_heatmap_ideal_preset(self, tmp_path):
        out = run_cli("heatmap", "--spec", "ideal", "--preset", "fig3",
                      "--seed", "7", "--out", str(tmp_path), *COMMON)
        assert out.returncode == 0
        lines = (tmp_path / "heatmap_ideal.csv").read_text().splitlines()
        assert len(lines) == 6401  # 80x80 cells plus header
        best = min(lines[1:], key=lambda l: float(l.split(",")[4]))
        r, c = int(best.split(",")[0]), int(best.split(",")[1])
        assert r in (39, 40) and c in (39, 40)

    def test_heatmap_supp2_preset_target(self, tmp_path):
        out = run_cli("heatmap", "--spec", "ideal", "--preset", "fig3-supp2",
                      "--out", str(tmp_path), *COMMON)
        assert out.returncode == 0
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["specs"] == ["ideal"]

    def test_heatmap_out_of_range_target(self, tmp_path):
        out = run_cli("heatmap", "--spec", "ideal", "--target-hz", "5000",
                      "--out", str(tmp_path))
        assert out.returncode == 2

    def test_curve_defaults(self, tmp_path):
        out = run_cli("curve", "--spec", "ideal", "--n-points", "11",
                      "--out", str(tmp_path), *COMMON)
        assert out.returncode == 0
        lines = (tmp_path / "curve_ideal.csv").read_text().splitlines()
        assert lines[0] == "target_hz,pred_hz,distance"
        assert len(lines) == 34  # three fig-2 targets

    def test_field_emits_derivative_pairs(self, tmp_path):
        out = run_cli("field", "--spec", "ideal", "--preset", "fig4",
                      "--mode", "numeric", "--out", str(tmp_path), *COMMON)
        assert out.returncode == 0
        lines = (tmp_path / "field_ideal_numeric.csv").read_text().splitlines()
        assert lines[0] == ("row,col,pred_hz,pred_db,"
                            "d_dpitch_per_cent,d_dlevel_per_db")
        assert len(lines) == 101

    def test_rerun_is_byte_identical(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        for d in (a_dir, b_dir):
            out = run_cli("heatmap", "--spec", "mel", "--target-hz", "346",
                          "--target-db", "-12.5", "--pitch-cells", "6",
                          "--level-cells", "6", "--seed", "9",
                          "--out", str(d), *COMMON)
            assert out.returncode == 0
        assert ((a_dir / "heatmap_mel.csv").read_bytes()
                == (b_dir / "heatmap_mel.csv").read_bytes())

    def test_version_flag(self):
        out = run_cli("--version")
        assert out.returncode == 0
        assert "pitchgrad" in out.stdout
