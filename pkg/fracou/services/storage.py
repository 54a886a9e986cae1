from __future__ import annotations

import csv
import io
import logging
import os
import secrets
import tempfile
from datetime import datetime, timezone

UTC = timezone.utc
from pathlib import Path
from typing import Iterable, Sequence

from dotenv import dotenv_values

from ..errors import UsageError
from ..schemas import Ensemble, ExperimentManifest

logger = logging.getLogger(__name__)

MAX_TABLE_ROWS = 1_000_000


def format_number(value: float) -> str:
    return format(float(value), ".17g")


def ensure_unique_path(path: Path) -> Path:
    """Генерирует уникальный путь, если файл уже существует"""
    if not path.exists():
        return path
    timestamp = datetime.now(UTC).strftime("%Y%m%d%H%M%S")
    random_suffix = secrets.token_hex(4)
    return path.with_name(f"{path.stem}__{timestamp}_{random_suffix}{path.suffix}")


def atomic_write_text(path: Path, text: str) -> Path:
    """Пишет через временный файл в той же директории и атомарно переименовывает его"""
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", newline="", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False
    )
    tmp_path = Path(handle.name)
    try:
        with handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except Exception:
        tmp_path.unlink(missing_ok=True)
        raise
    logger.info("Wrote file", extra={"path": str(path), "bytes": len(text.encode("utf-8"))})
    return path


def render_table(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format_number(cell) if isinstance(cell, float) else ("" if cell is None else cell) for cell in row]
        )
    return buffer.getvalue()


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    return atomic_write_text(path, render_table(header, rows))


def read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            rows = [row for row in reader if row]
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise UsageError(f"cannot read table {path}: {exc}") from exc
    if header is None:
        raise UsageError(f"table {path} has no header")
    if len(rows) > MAX_TABLE_ROWS:
        raise UsageError(f"table {path} has more than {MAX_TABLE_ROWS} rows")
    for number, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise UsageError(f"table {path} line {number}: expected {len(header)} fields, got {len(row)}")
    return header, rows


def ensemble_rows(ensemble: Ensemble) -> Iterable[tuple[int, float, float]]:
    times = ensemble.grid.times
    for path_id, values in enumerate(ensemble.values):
        for t, value in zip(times, values):
            yield path_id, float(t), float(value)


def write_ensemble(path: Path, ensemble: Ensemble) -> Path:
    return write_table(path, ("path_id", "t", "value"), ensemble_rows(ensemble))


def manifest_entries(manifest: ExperimentManifest) -> dict[str, str]:
    """Flat ``FOU_*`` keys; the numeric ones are read back by :class:`~fracou.config.Settings`."""
    entries = {
        "FOU_EXPERIMENT_KIND": manifest.experiment_kind.value,
        "FOU_HURST": format_number(manifest.params.hurst),
        "FOU_ALPHA": format_number(manifest.params.alpha),
        "FOU_GAMMA": format_number(manifest.params.gamma),
        "FOU_SEED": str(manifest.seed),
        "FOU_PATHS": str(manifest.paths),
        "FOU_REFINE": str(manifest.refine),
        "FOU_SAMPLER": manifest.sampler,
        "FOU_REL_TOL": format_number(manifest.quadrature.rel_tol),
        "FOU_ABS_TOL": format_number(manifest.quadrature.abs_tol),
        "FOU_MAX_SUBDIVISIONS": str(manifest.quadrature.max_subdivisions),
        "FOU_TRUNCATION_TOLERANCE": format_number(manifest.truncation.tolerance),
    }
    if manifest.t_max is not None:
        entries["FOU_T_MAX"] = format_number(manifest.t_max)
    if manifest.steps is not None:
        entries["FOU_STEPS"] = str(manifest.steps)
    if manifest.tau_grid is not None:
        entries["FOU_TAU_GRID"] = manifest.tau_grid
    if manifest.truncation.lower_cutoff is not None:
        entries["FOU_LOWER_CUTOFF"] = format_number(manifest.truncation.lower_cutoff)
    for key in sorted(manifest.extra):
        entries[f"FOU_X_{key.upper()}"] = manifest.extra[key]
    entries["FOU_TOOL_VERSION"] = manifest.tool_version
    entries["FOU_TIMESTAMP"] = manifest.timestamp
    return entries


def write_manifest(path: Path, manifest: ExperimentManifest) -> Path:
    lines = [f"{key}={value}" for key, value in manifest_entries(manifest).items()]
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise UsageError(f"manifest {path} does not exist")
    return {key: value or "" for key, value in dotenv_values(path).items()}


def make_run_directory(base: Path, kind: str) -> Path:
    """``<base>/<timestamp>-<kind>``, made unique on collision."""
    timestamp = datetime.now(UTC).strftime("%Y%m%dT%H%M%S")
    target = ensure_unique_path(base / f"{timestamp}-{kind}")
    target.mkdir(parents=True, exist_ok=False, mode=0o755)
    logger.info("Created run directory", extra={"run_dir": str(target)})
    return target
