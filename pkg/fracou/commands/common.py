"""Plumbing shared by the subcommands: common flags, run outputs and the registry."""
from __future__ import annotations

import argparse
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

UTC = timezone.utc
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .. import __version__
from ..config import Settings
from ..db import session_scope
from ..schemas import ExperimentKind, ExperimentManifest, MetricRow, ResultRecord
from ..services import runs as runs_service
from ..services.plotting import PlotStyle, render_svg
from ..services.storage import make_run_directory, write_manifest, write_table

logger = logging.getLogger(__name__)

METRIC_HEADER = ("metric", "estimate", "std_error", "target", "z")

# argparse dest -> Settings field; unset flags stay None and fall through to config/env
SETTING_FLAGS: dict[str, type] = {
    "hurst": float,
    "alpha": float,
    "gamma": float,
    "t_max": float,
    "steps": int,
    "paths": int,
    "seed": int,
    "refine": int,
    "rel_tol": float,
    "abs_tol": float,
    "max_subdivisions": int,
    "truncation_tolerance": float,
    "lower_cutoff": float,
    "workers": int,
    "chunk_size": int,
    "max_path_points": int,
    "runs_dir": Path,
    "registry_url": str,
    "log_level": str,
}


def common_parser(*, nested: bool = False) -> argparse.ArgumentParser:
    """Parent parser carrying the flags every subcommand accepts.

    ``nested`` copies sit one level below another copy (``experiment --seed 3
    decay-rate``); their unset flags are left out of the namespace so they do
    not overwrite values parsed at the outer level.
    """
    unset = argparse.SUPPRESS if nested else None
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("model and run settings")
    for dest, kind in SETTING_FLAGS.items():
        group.add_argument(f"--{dest.replace('_', '-')}", dest=dest, type=kind, default=unset)
    group.add_argument("--sampler", choices=("auto", "cholesky"), default=unset)
    group.add_argument("--config", type=Path, default=unset, help="KEY=VALUE file, e.g. a previous manifest")
    group.add_argument("--out", type=Path, default=unset, help="run directory base, or a .csv file")
    group.add_argument(
        "--strict", action="store_true", default=argparse.SUPPRESS if nested else False, help="exit 1 when any check fails"
    )
    return parser


def setting_overrides(args: argparse.Namespace) -> dict[str, Any]:
    names = (*SETTING_FLAGS, "sampler")
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


@dataclass
class RunOutcome:
    record: Optional[ResultRecord]
    passed: Optional[bool]
    failures: list[str] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)


def metric_table_rows(rows: Iterable[MetricRow]) -> list[tuple[object, ...]]:
    return [(row.metric, row.estimate, row.std_error, row.target, row.z) for row in rows]


def _slug(kind: ExperimentKind) -> str:
    return "".join(f"-{c.lower()}" if c.isupper() else c for c in kind.value).lstrip("-")


@dataclass
class RunOutput:
    """Where one run writes its tables, plots and manifest.

    ``--out`` naming a file (``xd.csv``) puts the first table there and the
    other artifacts beside it with the file stem as prefix; any other ``--out``
    is a base directory that receives a fresh ``<timestamp>-<kind>`` folder.
    """

    settings: Settings
    kind: ExperimentKind
    directory: Path
    target: Optional[Path] = None
    outputs: list[Path] = field(default_factory=list)
    started: float = field(default_factory=time.perf_counter)
    _target_used: bool = False

    @classmethod
    def open(cls, settings: Settings, kind: ExperimentKind, out: Optional[Path]) -> "RunOutput":
        if out is not None and out.suffix:
            out.parent.mkdir(parents=True, exist_ok=True)
            return cls(settings=settings, kind=kind, directory=out.parent, target=out)
        base = out if out is not None else settings.runs_dir
        return cls(settings=settings, kind=kind, directory=make_run_directory(base, _slug(kind)))

    def path(self, name: str) -> Path:
        if self.target is None:
            return self.directory / name
        if not self._target_used and Path(name).suffix == self.target.suffix:
            self._target_used = True
            return self.target
        return self.target.with_name(f"{self.target.stem}-{name}")

    def table(self, name: str, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
        path = write_table(self.path(name), header, rows)
        self.outputs.append(path)
        return path

    def metrics(self, name: str, rows: Sequence[MetricRow]) -> Path:
        return self.table(name, METRIC_HEADER, metric_table_rows(rows))

    def plot(
        self,
        table: Path,
        name: str,
        *,
        x: str,
        y: Sequence[str],
        logx: bool = False,
        logy: bool = False,
        style: PlotStyle = "line",
        title: Optional[str] = None,
    ) -> Path:
        path = render_svg(table, self.path(name), x=x, y=y, logx=logx, logy=logy, style=style, title=title)
        self.outputs.append(path)
        return path

    def manifest(
        self,
        *,
        paths: int = 0,
        t_max: Optional[float] = None,
        steps: Optional[int] = None,
        tau_grid: Optional[str] = None,
        extra: Optional[dict[str, str]] = None,
    ) -> ExperimentManifest:
        settings = self.settings
        return ExperimentManifest(
            experiment_kind=self.kind,
            params=settings.model_params(),
            seed=settings.seed,
            paths=paths,
            t_max=t_max,
            steps=steps,
            tau_grid=tau_grid,
            refine=settings.refine,
            sampler=settings.sampler,
            quadrature=settings.quadrature(),
            truncation=settings.truncation(),
            extra=extra or {},
            tool_version=__version__,
            timestamp=datetime.now(UTC).isoformat(timespec="seconds"),
        )

    def finish(
        self,
        manifest: ExperimentManifest,
        *,
        checks: Sequence[MetricRow] = (),
        passed: Optional[bool] = None,
        lines: Sequence[str] = (),
    ) -> RunOutcome:
        manifest_path = write_manifest(self.path("manifest.env"), manifest)
        failures = [row.metric for row in checks if not row.passed]
        if passed is None and checks:
            passed = not failures
        duration = time.perf_counter() - self.started
        with session_scope() as session:
            record = runs_service.record_run(
                session,
                kind=self.kind.value,
                run_dir=self.directory,
                manifest_path=manifest_path,
                outputs=self.outputs,
                passed=passed,
                duration_s=duration,
            )
        logger.info(
            "Finished run",
            extra={"kind": self.kind.value, "run_dir": str(self.directory), "passed": passed, "duration_s": duration},
        )
        summary = [f"{self.kind.value}: wrote {len(self.outputs)} file(s) to {self.directory}"]
        summary += [f"  {path}" for path in self.outputs]
        summary += list(lines)
        if passed is not None:
            summary.append("checks passed" if passed else f"checks FAILED: {', '.join(failures) or 'see tables'}")
        return RunOutcome(record=record, passed=passed, failures=failures, lines=summary)
