from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .errors import DomainError, UsageError


class ProcessTag(str, Enum):
    FBM = "FBM"
    XD = "XD"
    Y = "Y"
    FOU1 = "FOU1"
    FOU2 = "FOU2"
    OU = "OU"


class Fou1Init(str, Enum):
    ZERO = "Zero"
    STATIONARY = "StationaryTruncated"


class Fou2Method(str, Enum):
    LANGEVIN_ON_Y = "LangevinOnY"
    DIRECT_TRANSFORM = "DirectTransform"


class WeakConvergenceMode(str, Enum):
    QUADRATURE = "Quadrature"
    MONTE_CARLO = "MonteCarlo"


class RangeClass(str, Enum):
    SHORT_RANGE = "ShortRange"
    LONG_RANGE = "LongRange"
    INCONCLUSIVE = "Inconclusive"


class ExperimentKind(str, Enum):
    SIMULATE = "Simulate"
    COV = "Cov"
    KERNEL = "Kernel"
    WEAK_CONVERGENCE = "WeakConvergence"
    DECAY_RATE = "DecayRate"
    STATIONARITY = "Stationarity"
    RANGE_DEPENDENCE = "RangeDependence"
    HOLDER = "Holder"


class ModelParams(BaseModel):
    """Hurst exponent and the two mean-reversion rates shared by every process."""

    hurst: float = Field(default=0.75, gt=0.0, lt=1.0)
    alpha: float = Field(default=1.0, gt=0.0)
    gamma: float = Field(default=1.0, gt=0.0)

    model_config = ConfigDict(frozen=True)

    @field_validator("hurst", "alpha", "gamma", mode="after")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    @property
    def two_h(self) -> float:
        return 2.0 * self.hurst

    def require_kernel_regime(self) -> None:
        if not 0.5 < self.hurst < 1.0:
            raise DomainError(
                f"kernel representation requires 1/2 < H < 1, got H={self.hurst}"
            )

    def with_updates(self, **values: float) -> "ModelParams":
        return ModelParams(**{**self.model_dump(), **values})


class TimeGrid(BaseModel):
    times: tuple[float, ...]

    model_config = ConfigDict(frozen=True)

    @field_validator("times", mode="after")
    @classmethod
    def _strictly_increasing(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if len(value) < 1:
            raise ValueError("grid needs at least one time")
        if not all(math.isfinite(t) for t in value):
            raise ValueError("grid times must be finite")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("grid times must be strictly increasing")
        return value

    @classmethod
    def from_array(cls, times: np.ndarray | list[float]) -> "TimeGrid":
        return cls(times=tuple(float(t) for t in np.asarray(times, dtype=float)))

    @classmethod
    def uniform(cls, t_max: float, steps: int, start: float = 0.0) -> "TimeGrid":
        if steps < 1 or t_max <= start:
            raise UsageError(f"uniform grid needs steps >= 1 and t_max > {start}")
        return cls.from_array(np.linspace(start, t_max, steps + 1))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    @property
    def size(self) -> int:
        return len(self.times)

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        if self.size < 3:
            return self.size == 2
        steps = np.diff(self.array)
        return bool(np.allclose(steps, steps[0], rtol=rtol, atol=0.0))

    def index_of(self, t: float) -> int:
        arr = self.array
        idx = int(np.argmin(np.abs(arr - t)))
        if abs(arr[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise UsageError(f"time {t} is not on the ensemble grid")
        return idx


class QuadratureConfig(BaseModel):
    rel_tol: float = Field(default=1e-8, gt=0.0)
    abs_tol: float = Field(default=1e-10, gt=0.0)
    max_subdivisions: int = Field(default=200, ge=10)

    model_config = ConfigDict(frozen=True)

    def tolerance_for(self, value: float) -> float:
        return max(self.rel_tol * abs(value), self.abs_tol)

    @staticmethod
    def singularity_substitution_exponent(hurst: float) -> float:
        return 1.0 / (2.0 * hurst - 1.0)


class TruncationPolicy(BaseModel):
    """Finite realization of an improper ``∫_{-∞}`` integral.

    ``lower_cutoff`` is derived from ``tolerance`` when left unset; an explicit
    cutoff is checked against the tail bound instead.
    """

    tolerance: float = Field(default=1e-8, gt=0.0)
    lower_cutoff: Optional[float] = Field(default=None, lt=0.0)

    model_config = ConfigDict(frozen=True)


class KernelSpec(BaseModel):
    params: ModelParams

    model_config = ConfigDict(frozen=True)

    @classmethod
    def for_params(cls, params: ModelParams) -> "KernelSpec":
        params.require_kernel_regime()
        return cls(params=params)

    @property
    def c_const(self) -> float:
        h, a = self.params.hurst, self.params.alpha
        return h * (2.0 * h - 1.0) * (a / h) ** (2.0 * (1.0 - h))

    @property
    def decay_rate(self) -> float:
        h = self.params.hurst
        return self.params.alpha * (1.0 - h) / h

    @property
    def scale(self) -> float:
        return self.params.alpha / self.params.hurst


class CovEstimate(BaseModel):
    value: float
    std_error: float = Field(ge=0.0)
    count: int = Field(ge=1)


class FitReport(BaseModel):
    slope: float
    intercept: float
    r_squared: float = Field(ge=0.0, le=1.0)
    fit_range: tuple[float, float]


class StationarityReport(BaseModel):
    lag: float
    shifts: list[float]
    estimates: list[CovEstimate]
    max_abs_z: float
    passed: bool


class RangeDependenceReport(BaseModel):
    classification: RangeClass
    fit: FitReport
    power_fit: FitReport
    exponential_fit: FitReport
    tail_partial_sum: float


class MetricRow(BaseModel):
    metric: str
    estimate: float
    std_error: Optional[float] = None
    target: Optional[float] = None
    z: Optional[float] = None
    passed: bool = True


class WeakConvergenceRow(BaseModel):
    s: float
    t: float
    a: float
    value: float
    target: float
    error: float
    std_error: Optional[float] = None
    z: Optional[float] = None
    passed: bool


class WeakConvergenceReport(BaseModel):
    mode: WeakConvergenceMode
    kappa: float
    rows: list[WeakConvergenceRow]
    checks: list[MetricRow]
    passed: bool


class ExperimentManifest(BaseModel):
    experiment_kind: ExperimentKind
    params: ModelParams
    seed: int = 0
    paths: int = 0
    t_max: Optional[float] = None
    steps: Optional[int] = None
    tau_grid: Optional[str] = None
    refine: int = 8
    sampler: str = "auto"
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    truncation: TruncationPolicy = Field(default_factory=TruncationPolicy)
    extra: dict[str, str] = Field(default_factory=dict)
    tool_version: str
    timestamp: str


class ResultRecord(BaseModel):
    id: Optional[int] = None
    kind: str
    run_dir: str
    manifest_path: str
    outputs: list[str]
    passed: Optional[bool] = None
    duration_s: float
    created_at: Optional[datetime] = None

    model_config = ConfigDict(from_attributes=True)


@dataclass(frozen=True)
class SamplePath:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise UsageError("path length must match its grid")
        if not np.all(np.isfinite(values)):
            raise UsageError("path values must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Ensemble:
    """Seeded collection of realizations; ``values`` has shape (count, grid size)."""

    params: ModelParams
    grid: TimeGrid
    values: np.ndarray
    seed: int
    process_tag: ProcessTag
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] != self.grid.size:
            raise UsageError("ensemble needs at least one path on the shared grid")
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return int(self.values.shape[0])

    @property
    def paths(self) -> list[SamplePath]:
        return [SamplePath(self.grid, row) for row in self.values]

    def path(self, index: int) -> SamplePath:
        return SamplePath(self.grid, self.values[index])

    def column(self, t: float) -> np.ndarray:
        return self.values[:, self.grid.index_of(t)]


@dataclass(frozen=True)
class CovMatrix:
    grid: TimeGrid
    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (self.grid.size, self.grid.size):
            raise UsageError("covariance matrix must be n x n for its grid")
        if not np.array_equal(entries, entries.T):
            raise UsageError("covariance matrix must be exactly symmetric")
        object.__setattr__(self, "entries", entries)

    @property
    def max_diagonal(self) -> float:
        return float(np.max(np.diag(self.entries)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float

    def __float__(self) -> float:
        return self.value
