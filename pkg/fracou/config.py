from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterator, Literal, Optional

from dotenv import dotenv_values
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import UsageError
from .schemas import ModelParams, QuadratureConfig, TruncationPolicy


class Settings(BaseSettings):
    """Run configuration loaded from flags, a config file and ``FOU_*`` variables."""

    hurst: float = Field(default=0.75)
    alpha: float = Field(default=1.0)
    gamma: float = Field(default=1.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    t_max: float = Field(default=10.0)
    steps: int = Field(default=512)
    paths: int = Field(default=1000)
    refine: int = Field(default=8)
    rel_tol: float = Field(default=1e-8)
    abs_tol: float = Field(default=1e-10)
    max_subdivisions: int = Field(default=200)
    truncation_tolerance: float = Field(default=1e-8)
    lower_cutoff: Optional[float] = None
    chunk_size: int = Field(default=256)
    workers: int = Field(default=1)
    sampler: Literal["auto", "cholesky"] = "auto"
    max_path_points: int = Field(default=2**21)
    runs_dir: Path = Field(default=Path("runs"))
    registry_url: Optional[str] = None
    log_level: str = Field(default="INFO")

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="FOU_",
        case_sensitive=False,
        extra="ignore",
    )

    @field_validator("runs_dir", mode="before")
    @classmethod
    def _ensure_path(cls, value: str | Path) -> Path:
        return Path(value)

    @field_validator("registry_url", "lower_cutoff", mode="before")
    @classmethod
    def _empty_str_to_none(cls, value: Optional[str]) -> Optional[str]:
        if value in ("", None):
            return None
        return value

    @field_validator("t_max", "rel_tol", "abs_tol", "truncation_tolerance", mode="after")
    @classmethod
    def _validate_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be greater than zero")
        return value

    @field_validator("steps", "paths", "refine", "chunk_size", "workers", "max_path_points", mode="after")
    @classmethod
    def _validate_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @property
    def resolved_registry_url(self) -> str:
        return self.registry_url or f"sqlite:///{self.runs_dir / 'registry.db'}"

    def model_params(self) -> ModelParams:
        return ModelParams(hurst=self.hurst, alpha=self.alpha, gamma=self.gamma)

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(
            rel_tol=self.rel_tol, abs_tol=self.abs_tol, max_subdivisions=self.max_subdivisions
        )

    def truncation(self) -> TruncationPolicy:
        return TruncationPolicy(tolerance=self.truncation_tolerance, lower_cutoff=self.lower_cutoff)


def _config_file_values(config_file: Path) -> dict[str, str]:
    if not config_file.is_file():
        raise UsageError(f"config file {config_file} does not exist")
    values: dict[str, str] = {}
    for key, value in dotenv_values(config_file).items():
        name = key.lower()
        if name.startswith("fou_"):
            name = name[len("fou_") :]
        if name in Settings.model_fields and value is not None:
            values[name] = value
    return values


def load_settings(config_file: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None) -> Settings:
    """Flags (``overrides``) win over the config file, which wins over ``FOU_*`` variables."""
    values = _config_file_values(config_file) if config_file is not None else {}
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return Settings(**values)


_active_settings: ContextVar[Optional[Settings]] = ContextVar("active_settings", default=None)


@lru_cache
def _environment_settings() -> Settings:
    return Settings()


def get_settings() -> Settings:
    return _active_settings.get() or _environment_settings()


def clear_settings_cache() -> None:
    _environment_settings.cache_clear()


@contextmanager
def use_settings(settings: Settings) -> Iterator[Settings]:
    """Makes ``settings`` what :func:`get_settings` returns inside the block."""
    token = _active_settings.set(settings)
    try:
        yield settings
    finally:
        _active_settings.reset(token)
