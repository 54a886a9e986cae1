from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

from sqlalchemy import select
from sqlalchemy.orm import Session

from ..models import RunRecord
from ..schemas import ResultRecord

logger = logging.getLogger(__name__)


def record_run(
    session: Session,
    *,
    kind: str,
    run_dir: Path,
    manifest_path: Path,
    outputs: Sequence[Path],
    passed: Optional[bool],
    duration_s: float,
) -> ResultRecord:
    record = RunRecord(
        kind=kind,
        run_dir=str(run_dir),
        manifest_path=str(manifest_path),
        outputs=[str(path) for path in outputs],
        passed=passed,
        duration_s=duration_s,
    )
    session.add(record)
    session.flush()
    logger.info("Recorded run", extra={"run_id": record.id, "kind": kind, "passed": passed})
    return ResultRecord.model_validate(record)


def list_runs(session: Session, *, limit: int = 20, kind: Optional[str] = None) -> list[ResultRecord]:
    stmt = select(RunRecord).order_by(RunRecord.id.desc()).limit(limit)
    if kind is not None:
        stmt = stmt.where(RunRecord.kind == kind)
    return [ResultRecord.model_validate(record) for record in session.scalars(stmt)]
