from pathlib import Path

import pytest

from fracou.main import run
from fracou.schemas import ModelParams
from fracou.services import analytics
from fracou.services.storage import format_number, read_manifest, read_table


def _only(directory: Path, pattern: str) -> Path:
    matches = sorted(directory.rglob(pattern))
    assert len(matches) == 1, matches
    return matches[0]


def test_cov_writes_requested_file(tmp_path: Path, runs_dir: Path):
    out = tmp_path / "xd.csv"
    code = run(["cov", "--formula", "xd", "--tau-grid", "0:2:0.5", "--hurst", "0.6", "--out", str(out), "--runs-dir", str(runs_dir)])
    assert code == 0
    header, rows = read_table(out)
    assert header == ["x", "value", "error_estimate"]
    p = ModelParams(hurst=0.6)
    assert [row[1] for row in rows] == [format_number(analytics.xd_cov(p, 0.0, x)) for x in (0.0, 0.5, 1.0, 1.5, 2.0)]
    assert (tmp_path / "xd-cov.svg").is_file()
    manifest = read_manifest(tmp_path / "xd-manifest.env")
    assert float(manifest["FOU_HURST"]) == 0.6
    assert manifest["FOU_TAU_GRID"] == "0:2:0.5"
    assert manifest["FOU_X_FORMULA"] == "xd"


def test_simulate_is_reproducible(tmp_path: Path, runs_dir: Path):
    argv = ["simulate", "--process", "fou2", "--paths", "3", "--t-max", "1", "--steps", "4", "--refine", "2", "--seed", "5"]
    assert run([*argv, "--out", str(tmp_path / "a"), "--runs-dir", str(runs_dir)]) == 0
    assert run([*argv, "--out", str(tmp_path / "b"), "--runs-dir", str(runs_dir)]) == 0
    first = _only(tmp_path / "a", "ensemble.csv")
    second = _only(tmp_path / "b", "ensemble.csv")
    assert first.read_bytes() == second.read_bytes()
    header, rows = read_table(first)
    assert header == ["path_id", "t", "value"]
    assert len(rows) == 3 * 5
    manifest = read_manifest(_only(tmp_path / "a", "manifest.env"))
    assert manifest["FOU_X_FOU2_METHOD"] == "LangevinOnY"
    assert manifest["FOU_SEED"] == "5"


def test_simulate_replays_from_manifest(tmp_path: Path, runs_dir: Path):
    argv = ["simulate", "--process", "xd", "--paths", "2", "--t-max", "1", "--steps", "8", "--hurst", "0.3", "--seed", "9"]
    assert run([*argv, "--out", str(tmp_path / "first.csv"), "--runs-dir", str(runs_dir)]) == 0
    replay = ["simulate", "--process", "xd", "--config", str(tmp_path / "first-manifest.env")]
    assert run([*replay, "--out", str(tmp_path / "second.csv"), "--runs-dir", str(runs_dir)]) == 0
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()


def test_kernel_rejects_short_memory(tmp_path: Path, runs_dir: Path, capsys):
    code = run(["kernel", "--hurst", "0.4", "--out", str(tmp_path), "--runs-dir", str(runs_dir)])
    assert code == 2
    assert "1/2 < H < 1" in capsys.readouterr().err


def test_kernel_rejects_invalid_hurst(tmp_path: Path, runs_dir: Path, capsys):
    code = run(["kernel", "--hurst", "1.2", "--out", str(tmp_path), "--runs-dir", str(runs_dir)])
    assert code == 2
    err = capsys.readouterr().err
    assert "invalid parameters" in err
    assert "1/2 < H < 1" in err


def test_kernel_writes_constants(tmp_path: Path, runs_dir: Path):
    assert run(["kernel", "--x-grid", "0.5:5:0.5", "--out", str(tmp_path), "--runs-dir", str(runs_dir), "--strict"]) == 0
    header, rows = read_table(_only(tmp_path, "constants.csv"))
    names = [row[0] for row in rows]
    assert "kappa" in names and "sigma" in names
    kappa = analytics.kappa_sigma(ModelParams()).kappa
    assert float(rows[names.index("kappa")][1]) == pytest.approx(kappa)


def test_unknown_flag_is_a_usage_error(capsys):
    assert run(["cov", "--formula", "xd", "--bogus"]) == 2
    assert "unrecognized arguments" in capsys.readouterr().err


def test_missing_command_is_a_usage_error():
    assert run([]) == 2


def test_weak_convergence_passes_in_strict_mode(tmp_path: Path, runs_dir: Path, capsys):
    code = run(["experiment", "weak-convergence", "--strict", "--out", str(tmp_path), "--runs-dir", str(runs_dir)])
    assert code == 0
    assert "checks passed" in capsys.readouterr().out
    header, rows = read_table(_only(tmp_path, "weak_convergence.csv"))
    assert header[:3] == ["s", "t", "a"]
    assert len(rows) == 4 * 2


def test_decay_rate_experiment(tmp_path: Path, runs_dir: Path):
    assert run(["experiment", "decay-rate", "--curve", "xd", "--strict", "--out", str(tmp_path), "--runs-dir", str(runs_dir)]) == 0
    header, rows = read_table(_only(tmp_path, "fit.csv"))
    slope = {row[0]: row for row in rows}["log_decay.slope"]
    assert float(slope[1]) == pytest.approx(-1.0 / 3.0, rel=0.05)


def test_experiment_flags_before_the_sub_experiment(tmp_path: Path, runs_dir: Path):
    argv = ["experiment", "--hurst", "0.6", "--seed", "3", "--strict", "decay-rate", "--curve", "xd"]
    assert run([*argv, "--out", str(tmp_path), "--runs-dir", str(runs_dir)]) == 0
    manifest = read_manifest(_only(tmp_path, "*manifest.env"))
    assert float(manifest["FOU_HURST"]) == 0.6
    assert manifest["FOU_SEED"] == "3"
    header, rows = read_table(_only(tmp_path, "fit.csv"))
    slope = {row[0]: row for row in rows}["log_decay.slope"]
    assert float(slope[1]) == pytest.approx(-analytics.xd_decay_rate(ModelParams(hurst=0.6)), rel=0.05)


def test_sub_experiment_flags_override_experiment_flags(tmp_path: Path, runs_dir: Path):
    argv = ["experiment", "--hurst", "0.6", "decay-rate", "--curve", "xd", "--hurst", "0.9"]
    assert run([*argv, "--out", str(tmp_path), "--runs-dir", str(runs_dir)]) == 0
    manifest = read_manifest(_only(tmp_path, "*manifest.env"))
    assert float(manifest["FOU_HURST"]) == 0.9

def test_range_dependence_failure_sets_exit_code(tmp_path: Path, runs_dir: Path, capsys):
    argv = ["experiment", "range-dependence", "--sequence", "fgn", "--hurst", "0.75", "--expect", "ShortRange"]
    assert run([*argv, "--out", str(tmp_path), "--runs-dir", str(runs_dir)]) == 0
    assert run([*argv, "--strict", "--out", str(tmp_path), "--runs-dir", str(runs_dir)]) == 1
    assert "failed checks" in capsys.readouterr().err


def test_flags_beat_config_file_which_beats_environment(tmp_path: Path, runs_dir: Path, monkeypatch):
    config = tmp_path / "run.env"
    config.write_text("FOU_HURST=0.6\nFOU_ALPHA=2\nFOU_GAMMA=1.5\n", encoding="utf-8")
    monkeypatch.setenv("FOU_GAMMA", "3")
    monkeypatch.setenv("FOU_SEED", "11")
    out = tmp_path / "cov.csv"
    argv = ["cov", "--formula", "ou", "--tau-grid", "0:1:0.5", "--config", str(config), "--hurst", "0.7"]
    assert run([*argv, "--out", str(out), "--runs-dir", str(runs_dir)]) == 0
    manifest = read_manifest(tmp_path / "cov-manifest.env")
    assert float(manifest["FOU_HURST"]) == 0.7
    assert manifest["FOU_ALPHA"] == "2"
    assert manifest["FOU_GAMMA"] == "1.5"
    assert manifest["FOU_SEED"] == "11"


def test_missing_config_file(runs_dir: Path, capsys):
    assert run(["cov", "--formula", "xd", "--config", "/nonexistent/run.env", "--runs-dir", str(runs_dir)]) == 2
    assert "does not exist" in capsys.readouterr().err


def test_render_and_runs_listing(tmp_path: Path, runs_dir: Path, capsys):
    table = tmp_path / "ou.csv"
    assert run(["cov", "--formula", "ou", "--tau-grid", "0:3:0.5", "--out", str(table), "--runs-dir", str(runs_dir)]) == 0
    svg = tmp_path / "plots" / "ou.svg"
    assert run(["render", "--table", str(table), "--x", "x", "--y", "value", "--logy", "--out", str(svg)]) == 0
    assert svg.read_text(encoding="utf-8").lstrip().startswith("<?xml")
    assert run(["render", "--table", str(table), "--x", "x", "--y", "missing", "--out", str(svg)]) == 2
    capsys.readouterr()

    assert run(["runs", "--runs-dir", str(runs_dir), "--kind", "Cov"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1
    assert "\tCov\t" in lines[0]
