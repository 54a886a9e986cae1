import os
import shutil
from pathlib import Path

import pytest

os.environ.setdefault("FOU_RUNS_DIR", "./test_runs")
os.environ.setdefault("FOU_LOG_LEVEL", "WARNING")
os.environ.setdefault("FOU_PATHS", "200")

from fracou.config import Settings, clear_settings_cache, get_settings, use_settings
from fracou.schemas import QuadratureConfig


@pytest.fixture(scope="session", autouse=True)
def setup_environment():
    clear_settings_cache()
    settings = get_settings()
    yield
    shutil.rmtree(settings.runs_dir, ignore_errors=True)


@pytest.fixture
def runs_dir(tmp_path: Path) -> Path:
    return tmp_path / "runs"


@pytest.fixture
def settings_override():
    """Activates settings built from keyword overrides for the rest of the test."""
    stack = []

    def activate(**values) -> Settings:
        manager = use_settings(Settings(**values))
        stack.append(manager)
        return manager.__enter__()

    yield activate
    while stack:
        stack.pop().__exit__(None, None, None)


@pytest.fixture
def quad() -> QuadratureConfig:
    return QuadratureConfig()


__all__ = ["quad", "runs_dir", "settings_override"]
