from typing import Optional, Sequence


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench."""


class DomainError(WorkbenchError, ValueError):
    """Argument outside the domain of a special function or kernel."""


class GeometryError(WorkbenchError, ValueError):
    pass


class NearBoundaryError(GeometryError):
    def __init__(self, message: str, indices: Sequence[int] = ()):
        super().__init__(message)
        self.indices = list(indices)


class OperatorError(WorkbenchError, ValueError):
    pass


class FormulationError(WorkbenchError, ValueError):
    pass


class ConditioningError(WorkbenchError, ArithmeticError):
    def __init__(self, message: str, rcond: Optional[float] = None):
        super().__init__(message)
        self.rcond = rcond


class ResonanceError(ConditioningError):
    pass


class TruncationError(WorkbenchError, ArithmeticError):
    pass


class NoiseError(WorkbenchError, ValueError):
    pass


class AdmissibilityError(WorkbenchError, ArithmeticError):
    pass


class ConfigError(WorkbenchError, ValueError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


class ArchiveError(WorkbenchError, IOError):
    pass


class DatasetError(WorkbenchError):
    def __init__(self, m: int, n: int, cause: Exception):
        super().__init__(f"solve failed at wavenumber index {m}, direction index {n}: {cause}")
        self.m = m
        self.n = n
        self.cause = cause
