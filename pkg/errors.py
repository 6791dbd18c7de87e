from typing import Optional


class SpectralLabError(Exception):
    """Base class for every failure raised by the numerical layers."""


class DomainError(SpectralLabError, ValueError):
    pass


class BranchError(SpectralLabError):
    """z = 0 has no usable square-root branch for the free solutions."""


class IntegrationError(SpectralLabError):
    def __init__(self, message: str, last_x: Optional[float] = None):
        super().__init__(message if last_x is None else f"{message} (last good x={last_x:.6g})")
        self.last_x = last_x


class AccuracyError(SpectralLabError):
    def __init__(self, message: str, estimate: Optional[float] = None):
        super().__init__(message if estimate is None else f"{message} (achieved estimate {estimate:.3e})")
        self.estimate = estimate


class NearEigenvalueError(SpectralLabError):
    def __init__(self, message: str, value: Optional[complex] = None):
        super().__init__(message)
        self.value = value


class ConditioningError(SpectralLabError):
    pass


class TailError(SpectralLabError):
    pass


class GridRefinementError(SpectralLabError):
    def __init__(self, message: str, depth: int = 0):
        super().__init__(message)
        self.depth = depth


class SignSplitError(SpectralLabError):
    pass


class ExclusionZoneError(SpectralLabError):
    pass


class ConfigError(SpectralLabError):
    def __init__(self, message: str, field: Optional[str] = None, row: Optional[int] = None):
        prefix = f"{field}: " if field else ""
        suffix = f" (row {row})" if row is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")
        self.field = field
        self.row = row


class OutputError(SpectralLabError):
    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path
