from __future__ import annotations

from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path
from typing import Generator

from sqlalchemy import Engine, create_engine
from sqlalchemy.orm import DeclarativeBase, Session, sessionmaker

from .config import get_settings

_SQLITE_PREFIX = "sqlite:///"


class Base(DeclarativeBase):
    pass


@lru_cache
def _engine_for(url: str) -> Engine:
    if url.startswith(_SQLITE_PREFIX):
        Path(url[len(_SQLITE_PREFIX) :]).parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(url, future=True)
    from . import models  # noqa: F401  registers tables on Base.metadata

    Base.metadata.create_all(engine)
    return engine


def get_engine() -> Engine:
    return _engine_for(get_settings().resolved_registry_url)


@contextmanager
def session_scope() -> Generator[Session, None, None]:
    session = sessionmaker(bind=get_engine(), autoflush=False, autocommit=False, expire_on_commit=False)()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
