from __future__ import annotations

from datetime import datetime, timezone

UTC = timezone.utc

from sqlalchemy import JSON, Boolean, DateTime, Float, Integer, String, Text, func
from sqlalchemy.orm import Mapped, mapped_column

from .db import Base


class RunRecord(Base):
    __tablename__ = "runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    kind: Mapped[str] = mapped_column(String(64), nullable=False)
    run_dir: Mapped[str] = mapped_column(Text, nullable=False)
    manifest_path: Mapped[str] = mapped_column(Text, nullable=False)
    outputs: Mapped[list] = mapped_column(JSON, nullable=False, default=list)
    passed: Mapped[bool | None] = mapped_column(Boolean, nullable=True)
    duration_s: Mapped[float] = mapped_column(Float, nullable=False)
    created_at: Mapped[datetime] = mapped_column(DateTime(timezone=True), server_default=func.now(), nullable=False)

    def __init__(
        self,
        *,
        kind: str,
        run_dir: str,
        manifest_path: str,
        outputs: list[str] | None = None,
        passed: bool | None = None,
        duration_s: float,
        created_at: datetime | None = None,
    ) -> None:
        self.kind = kind
        self.run_dir = run_dir
        self.manifest_path = manifest_path
        self.outputs = outputs or []
        self.passed = passed
        self.duration_s = duration_s
        self.created_at = created_at or datetime.now(UTC)
