"""Command-line pipeline: determinism, outputs, exit codes."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

import twinimg as t
from twinimg.cli import main

TINY_CONFIG = """\
# quick desk run
grid_size = 64
frames = 30
seed = 5
mean_pairs_per_frame = 200.0
"""

# matched run small enough for CLI tests, large enough for a clean peak
CLI_CONFIG = """\
grid_size = 256
frames = 200
seed = 13
"""


def run(args, env=None):
    return CliRunner().invoke(main, args, env=env, catch_exceptions=False)


def read_all_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir())}


@pytest.fixture(scope="module")
def cli_run_dir(tmp_path_factory):
    """One matched 200-frame simulation of both planes, analyzed once."""
    base = tmp_path_factory.mktemp("cli")
    cfg_path = base / "run.cfg"
    cfg_path.write_text(CLI_CONFIG)
    for plane in ("near", "far"):
        result = run(["simulate", "--config", str(cfg_path), "--plane", plane,
                      "--out", str(base)])
        assert result.exit_code == 0, result.output
    out = base / "analysis"
    result = run([
        "analyze",
        "--near", str(base / "near_cam1.twim"), str(base / "near_cam2.twim"),
        "--far", str(base / "far_cam1.twim"), str(base / "far_cam2.twim"),
        "--out", str(out), "--bootstrap", "30",
        "--snr-frames", "2,3,5,10,20,40,80,150,200",
    ])
    assert result.exit_code == 0, result.output
    return base, out, result.output


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        a, b = tmp_path / "a", tmp_path / "b"
        out1 = run(["simulate", "--config", str(cfg), "--plane", "near", "--out", str(a)])
        out2 = run(["simulate", "--config", str(cfg), "--plane", "near", "--out", str(b)])
        assert out1.exit_code == 0 and out2.exit_code == 0
        assert read_all_bytes(a) == read_all_bytes(b)

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        a, b = tmp_path / "w1", tmp_path / "w4"
        run(["simulate", "--config", str(cfg), "--plane", "far", "--out", str(a)])
        run(["simulate", "--config", str(cfg), "--plane", "far", "--out", str(b),
             "--workers", "4"])
        assert read_all_bytes(a) == read_all_bytes(b)

    def test_echoed_config_reproduces_run(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        a, b = tmp_path / "orig", tmp_path / "echo"
        result = run(["simulate", "--config", str(cfg), "--plane", "near", "--out", str(a)])
        echo_lines = [ln for ln in result.output.splitlines() if not ln.startswith("wrote ")]
        echoed = tmp_path / "echoed.cfg"
        echoed.write_text("\n".join(echo_lines) + "\n")
        run(["simulate", "--config", str(echoed), "--plane", "near", "--out", str(b)])
        assert read_all_bytes(a) == read_all_bytes(b)

    def test_override_flags_change_output(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        a, b = tmp_path / "s5", tmp_path / "s6"
        run(["simulate", "--config", str(cfg), "--plane", "near", "--out", str(a)])
        run(["simulate", "--config", str(cfg), "--plane", "near", "--seed", "6",
             "--out", str(b)])
        assert (a / "near_cam1.twim").read_bytes() != (b / "near_cam1.twim").read_bytes()

    def test_zero_frames_rejected(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        result = run(["simulate", "--config", str(cfg), "--plane", "near",
                      "--frames", "0", "--out", str(tmp_path)])
        assert result.exit_code != 0
        assert "frames" in result.output

    def test_config_error_reports_line(self, tmp_path):
        cfg = tmp_path / "broken.cfg"
        cfg.write_text("grid_size = 64\nwavelenght = 0.7\n")
        result = run(["simulate", "--config", str(cfg), "--plane", "near",
                      "--out", str(tmp_path)])
        assert result.exit_code != 0
        assert ":2: unknown key 'wavelenght'" in result.output

    def test_env_var_output_directory(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        target = tmp_path / "from_env"
        result = run(["simulate", "--config", str(cfg), "--plane", "near"],
                     env={"TWINIMG_OUTDIR": str(target)})
        assert result.exit_code == 0
        assert (target / "near_cam1.twim").exists()


class TestAnalyze:
    def test_outputs_written_and_valid(self, cli_run_dir):
        _, out, output = cli_run_dir
        for name in ("report.json", "near_corr.csv", "far_corr.csv", "snr.csv"):
            assert (out / name).exists(), name
        report = t.read_report(out / "report.json")  # schema-validated
        assert report.x.violated and report.y.violated
        assert 60 < report.x.v < 120
        assert 450 < report.y.v < 750
        assert "VIOLATED" in output
        # the fully resolved configurations are echoed for reproducibility
        assert "# resolved near configuration" in output
        assert "grid_size = 256" in output

    def test_rerun_byte_identical(self, cli_run_dir, tmp_path):
        base, out, _ = cli_run_dir
        again = tmp_path / "again"
        result = run([
            "analyze",
            "--near", str(base / "near_cam1.twim"), str(base / "near_cam2.twim"),
            "--far", str(base / "far_cam1.twim"), str(base / "far_cam2.twim"),
            "--out", str(again), "--bootstrap", "30",
            "--snr-frames", "2,3,5,10,20,40,80,150,200",
        ])
        assert result.exit_code == 0
        assert read_all_bytes(out) == read_all_bytes(again)

    def test_independent_seeds_no_peak(self, tmp_path):
        cfg_a = tmp_path / "a.cfg"
        cfg_a.write_text("grid_size = 128\nframes = 60\nseed = 1\n")
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        run(["simulate", "--config", str(cfg_a), "--plane", "near", "--out", str(dir_a)])
        run(["simulate", "--config", str(cfg_a), "--plane", "near", "--seed", "2",
             "--out", str(dir_b)])
        run(["simulate", "--config", str(cfg_a), "--plane", "far", "--out", str(dir_a)])
        result = run([
            "analyze",
            "--near", str(dir_a / "near_cam1.twim"), str(dir_b / "near_cam2.twim"),
            "--far", str(dir_a / "far_cam1.twim"), str(dir_a / "far_cam2.twim"),
            "--out", str(tmp_path / "null"),
        ])
        assert result.exit_code != 0
        assert "no significant" in result.output

    def test_plane_mismatch_rejected(self, cli_run_dir, tmp_path):
        base, _, _ = cli_run_dir
        result = run([
            "analyze",
            "--near", str(base / "far_cam1.twim"), str(base / "far_cam2.twim"),
            "--far", str(base / "near_cam1.twim"), str(base / "near_cam2.twim"),
            "--out", str(tmp_path),
        ])
        assert result.exit_code != 0
        assert "expected near-field frames" in result.output


class TestReport:
    def test_violated_report_exits_zero(self, cli_run_dir):
        _, out, _ = cli_run_dir
        result = run(["report", str(out / "report.json")])
        assert result.exit_code == 0
        assert result.output.count("VIOLATED") >= 2
        assert "Schmidt" in result.output

    def test_bound_exact_product_exits_nonzero(self, cli_run_dir, tmp_path):
        _, out, _ = cli_run_dir
        doc = json.loads((out / "report.json").read_text())
        doc["x"]["violated"] = False
        doc["x"]["product"] = 0.25
        doc["x"]["n_sigma"] = 0.0
        path = tmp_path / "at_bound.json"
        path.write_text(json.dumps(doc))
        result = run(["report", str(path)])
        assert result.exit_code == 2
        assert "NOT VIOLATED" in result.output

    def test_malformed_report_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"schema\": \"twinimg-report/1\"}")
        result = run(["report", str(bad)])
        assert result.exit_code not in (0, 2)
        assert "cannot read report" in result.output

    def test_schmidt_consistent_with_printed_v(self, cli_run_dir):
        _, out, _ = cli_run_dir
        report = t.read_report(out / "report.json")
        import math
        assert report.schmidt_k == pytest.approx(
            math.sqrt(report.x.v * report.y.v), rel=1e-12)
