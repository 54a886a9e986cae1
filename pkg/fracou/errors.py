from __future__ import annotations


class FouError(Exception):
    """Base error; ``exit_code`` is what the CLI returns when it surfaces."""

    exit_code: int = 1

    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


class UsageError(FouError, ValueError):
    exit_code = 2


class DomainError(FouError, ValueError):
    exit_code = 2


class SingularityError(DomainError):
    pass


class ConfigurationError(FouError):
    exit_code = 2


class BudgetError(FouError):
    exit_code = 2


class QuadratureError(FouError):
    def __init__(self, detail: str, *, estimate: float, error: float) -> None:
        super().__init__(f"{detail} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class CovarianceConsistencyError(FouError):
    def __init__(self, detail: str, *, min_eigenvalue: float) -> None:
        super().__init__(f"{detail} (min eigenvalue={min_eigenvalue!r})")
        self.min_eigenvalue = min_eigenvalue


class CheckFailedError(FouError):
    pass
