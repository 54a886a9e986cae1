from __future__ import annotations

import argparse
from pathlib import Path

from ..config import Settings
from ..db import session_scope
from ..schemas import ExperimentKind
from ..services import runs as runs_service
from .common import RunOutcome


def register(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("runs", help="list recorded runs, newest first")
    parser.add_argument("--limit", type=int, default=20)
    parser.add_argument("--kind", choices=[kind.value for kind in ExperimentKind], default=None)
    parser.add_argument("--runs-dir", dest="runs_dir", type=Path, default=None)
    parser.add_argument("--registry-url", dest="registry_url", default=None)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    with session_scope() as session:
        records = runs_service.list_runs(session, limit=args.limit, kind=args.kind)
    lines = []
    for record in records:
        status = "-" if record.passed is None else ("passed" if record.passed else "FAILED")
        created = record.created_at.isoformat(timespec="seconds") if record.created_at else ""
        lines.append(f"{record.id}\t{created}\t{record.kind}\t{status}\t{record.duration_s:.2f}s\t{record.run_dir}")
    return RunOutcome(record=None, passed=None, lines=lines or ["no runs recorded"])
