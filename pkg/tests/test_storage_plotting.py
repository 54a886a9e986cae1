from pathlib import Path

import numpy as np
import pytest

from fracou.config import load_settings
from fracou.errors import UsageError
from fracou.schemas import Ensemble, ExperimentKind, ExperimentManifest, ModelParams, ProcessTag, TimeGrid, TruncationPolicy
from fracou.services import storage
from fracou.services.plotting import render_svg


def test_format_number_round_trips_doubles():
    value = 0.1 + 0.2
    assert float(storage.format_number(value)) == value
    assert storage.format_number(1.0) == "1"
    assert storage.format_number(np.float64(2.5)) == "2.5"


def test_write_table_formats_cells(tmp_path: Path):
    path = storage.write_table(tmp_path / "t.csv", ("x", "value", "note"), [(1, 0.5, None), (2, 0.25, "ok")])
    assert path.read_text(encoding="utf-8") == "x,value,note\n1,0.5,\n2,0.25,ok\n"
    assert not list(tmp_path.glob(".*.tmp"))


def test_atomic_write_leaves_no_partial_file(tmp_path: Path, monkeypatch):
    target = tmp_path / "out.txt"

    def fail(_src, _dst):
        raise OSError("disk full")

    monkeypatch.setattr(storage.os, "replace", fail)
    with pytest.raises(OSError):
        storage.atomic_write_text(target, "data")
    assert not target.exists()
    assert list(tmp_path.iterdir()) == []


def test_ensure_unique_path(tmp_path: Path):
    path = tmp_path / "cov.csv"
    assert storage.ensure_unique_path(path) == path
    path.write_text("x\n", encoding="utf-8")
    unique = storage.ensure_unique_path(path)
    assert unique != path
    assert unique.name.startswith("cov__") and unique.suffix == ".csv"


def test_read_table_errors(tmp_path: Path):
    with pytest.raises(UsageError):
        storage.read_table(tmp_path / "missing.csv")
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(UsageError, match="no header"):
        storage.read_table(empty)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,b\n1,2\n3\n", encoding="utf-8")
    with pytest.raises(UsageError, match="line 3"):
        storage.read_table(ragged)


def test_write_ensemble_is_long_format(tmp_path: Path):
    ensemble = Ensemble(
        params=ModelParams(),
        grid=TimeGrid(times=(0.0, 0.5)),
        values=np.array([[0.0, 1.0], [0.0, -1.0]]),
        seed=1,
        process_tag=ProcessTag.FBM,
    )
    header, rows = storage.read_table(storage.write_ensemble(tmp_path / "e.csv", ensemble))
    assert header == ["path_id", "t", "value"]
    assert rows == [["0", "0", "0"], ["0", "0.5", "1"], ["1", "0", "0"], ["1", "0.5", "-1"]]


def test_manifest_reloads_as_configuration(tmp_path: Path):
    manifest = ExperimentManifest(
        experiment_kind=ExperimentKind.SIMULATE,
        params=ModelParams(hurst=0.6, alpha=2.0, gamma=0.5),
        seed=42,
        paths=17,
        t_max=3.0,
        steps=12,
        refine=4,
        sampler="cholesky",
        truncation=TruncationPolicy(tolerance=1e-6, lower_cutoff=-25.0),
        extra={"process": "fou2"},
        tool_version="0.1.0",
        timestamp="2026-01-01T00:00:00+00:00",
    )
    path = storage.write_manifest(tmp_path / "manifest.env", manifest)
    entries = storage.read_manifest(path)
    assert entries["FOU_EXPERIMENT_KIND"] == "Simulate"
    assert entries["FOU_X_PROCESS"] == "fou2"

    settings = load_settings(path)
    assert settings.model_params() == manifest.params
    assert (settings.seed, settings.paths, settings.t_max, settings.steps) == (42, 17, 3.0, 12)
    assert (settings.refine, settings.sampler) == (4, "cholesky")
    assert settings.truncation() == manifest.truncation


def test_read_manifest_requires_file(tmp_path: Path):
    with pytest.raises(UsageError):
        storage.read_manifest(tmp_path / "nope.env")


def test_make_run_directory_is_unique(tmp_path: Path):
    first = storage.make_run_directory(tmp_path, "cov")
    second = storage.make_run_directory(tmp_path, "cov")
    assert first.is_dir() and second.is_dir()
    assert first != second
    assert first.name.endswith("-cov")


def _table(tmp_path: Path) -> Path:
    rows = [(x, float(np.exp(-x)), float(np.exp(-2 * x))) for x in np.linspace(0.0, 4.0, 9)]
    return storage.write_table(tmp_path / "curve.csv", ("x", "a", "b"), rows)


def test_render_svg_is_byte_stable(tmp_path: Path):
    table = _table(tmp_path)
    first = render_svg(table, tmp_path / "one.svg", x="x", y=["a", "b"], logy=True, title="decay")
    second = render_svg(table, tmp_path / "two.svg", x="x", y=["a", "b"], logy=True, title="decay")
    content = first.read_bytes()
    assert content.startswith(b"<?xml")
    assert content == second.read_bytes()


def test_render_svg_of_empty_table(tmp_path: Path):
    table = storage.write_table(tmp_path / "empty.csv", ("x", "value"), [])
    out = render_svg(table, tmp_path / "empty.svg", x="x", y=["value"], style="markers")
    assert out.read_text(encoding="utf-8").rstrip().endswith("</svg>")


def test_render_svg_rejects_unknown_column(tmp_path: Path):
    with pytest.raises(UsageError, match="no column 'c'"):
        render_svg(_table(tmp_path), tmp_path / "bad.svg", x="x", y=["c"])
