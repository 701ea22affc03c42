"""
Exception hierarchy for the calibration toolkit.

Every failure raised by the library derives from CalibrationError so the
command-line layer can translate it into an exit code in one place.
"""

from typing import List, Optional


class CalibrationError(Exception):
    """Base class for all calibration failures."""


class DomainError(CalibrationError, ValueError):
    """A timestamp falls outside a spline's valid evaluation interval."""

    def __init__(self, t: float, t_min: float, t_max: float):
        self.t = float(t)
        self.t_min = float(t_min)
        self.t_max = float(t_max)
        super().__init__(
            f"time {self.t:.9f} s outside spline domain "
            f"[{self.t_min:.9f}, {self.t_max:.9f})"
        )


class InsufficientDataError(CalibrationError, ValueError):
    """Too few poses, samples or correspondences to constrain a problem."""


class ObservabilityError(CalibrationError):
    """A problem is rank deficient along one or more directions.

    Attributes:
        directions: Human-readable descriptions of the near-null directions
    """

    def __init__(self, message: str, directions: Optional[List[str]] = None):
        self.directions = list(directions or [])
        if self.directions:
            message = f"{message}: " + "; ".join(self.directions)
        super().__init__(message)


class DegenerateRegistrationError(ObservabilityError):
    """Scan registration is unconstrained along some pose direction."""


class DivergenceError(CalibrationError):
    """The optimizer produced a non-finite cost."""


class ExcitationError(CalibrationError):
    """The recorded motion is too weak to calibrate from."""


class DatasetError(CalibrationError):
    """A dataset file could not be parsed or validated.

    Attributes:
        path: File that failed
        line: 1-based line number when known
    """

    def __init__(self, message: str, path: str, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        location = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{location}: {message}")


class ConfigError(CalibrationError):
    """A configuration file or value is invalid."""


class StageError(CalibrationError):
    """Wraps a failure with the pipeline stage it happened in.

    The original exception is kept as ``__cause__``.
    """

    def __init__(self, stage: str, error: Exception):
        self.stage = stage
        self.error = error
        super().__init__(f"[{stage}] {type(error).__name__}: {error}")
