"""Exception hierarchy for fixcam-mot."""

from pathlib import Path


class FixcamError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FixcamError):
    """Invalid, unknown or unreadable configuration."""


class InputError(FixcamError):
    """A path could not be read or written."""


class FrameImageError(InputError):
    """A frame image exists but cannot be decoded."""

    def __init__(self, path: Path, reason: str) -> None:
        super().__init__(f"cannot decode frame image {path}: {reason}")
        self.path = path


class DataError(FixcamError):
    """Stream or file content violates its format or ordering contract."""


class MalformedRecordError(DataError):
    """A line of a MOT-format file could not be parsed."""

    def __init__(self, path: Path | str, line: int, column: int | None, reason: str) -> None:
        where = f"{path}:{line}" if column is None else f"{path}:{line}:{column}"
        super().__init__(f"{where}: {reason}")
        self.path = Path(path)
        self.line = line
        self.column = column


class StreamOrderError(DataError):
    """Frame ids did not increase by exactly one."""


class InvalidDetectionError(DataError):
    """A detection box is degenerate (w <= 0 or h <= 0)."""


class ScenarioError(DataError):
    """A synthetic scenario violates its invariants."""


class CovarianceError(FixcamError):
    """The innovation covariance could not be factorized."""


class FingerprintError(FixcamError):
    """A fingerprint cannot be compared (zero norm or dimension mismatch)."""


class PatchOutOfBoundsError(FingerprintError):
    """The detection box does not overlap the frame image."""
