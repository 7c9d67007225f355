"""Exception hierarchy shared by all smartseat modules.

ConfigError-derived exceptions map to CLI exit code 2, DataError-derived
to 3, everything else under SmartSeatError to 4.
"""


class SmartSeatError(Exception):
    """Base class for all smartseat errors."""


class ConfigError(SmartSeatError):
    """Invalid configuration (bad bands, ports, hyperparameters...)."""


class DataError(SmartSeatError):
    """Invalid or insufficient input data."""


class InvalidInputError(DataError):
    """An argument violates an operation's precondition."""


class InvalidConfigError(ConfigError):
    """A configuration object is internally inconsistent."""


class InsufficientDataError(DataError):
    """Not enough samples/peaks/rows to compute a result."""


class UndefinedCorrelationError(DataError):
    """Correlation requested for a constant series."""


class ParseError(DataError):
    """A text file failed to parse; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidLabelError(DataError):
    """A posture label outside the fixed vocabulary."""


class LabelMismatchError(DataError):
    """Posture schedule does not cover the detected segments."""


class StratificationError(DataError):
    """A class is too small to split under stratification."""


class InsufficientClassesError(DataError):
    """Training set is missing one or more declared classes."""


class ExportError(SmartSeatError):
    """Base class for model export/load failures."""


class UnsupportedFormatError(ExportError):
    """Model kind / export format pairing is not supported."""


class ArtifactCorruptionError(ExportError):
    """Artifact bytes fail checksum or structural validation."""


class ArtifactVersionError(ExportError):
    """Artifact was written by an unknown format version."""


class WireError(SmartSeatError):
    """Base class for wire-protocol decode failures."""


class FramingError(WireError):
    """Bad magic byte or malformed frame header."""


class IncompleteFrameError(WireError):
    """Buffer ends before the declared frame length."""


class ValueRangeError(WireError):
    """A decoded field is outside its legal range."""


class NotFoundError(SmartSeatError):
    """Unknown session or artifact id."""


class StartupError(ConfigError):
    """Monitor service failed to start (port in use, bad model...)."""
