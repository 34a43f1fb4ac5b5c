"""Exception types shared across the package."""


class TexsynError(Exception):
    """Base class for all texsyn errors."""


class FormatError(TexsynError):
    """A file or byte stream violates its declared format."""


class DomainError(TexsynError):
    """An operation received a grid in the wrong value domain."""


class LayoutError(TexsynError):
    """Segment geometry cannot tile the requested output exactly."""


class ConsistencyError(TexsynError):
    """Overlapping segments disagree, so they cannot come from one grid."""


class SpecError(TexsynError):
    """A network or synthesis specification is internally inconsistent."""


class ConfigError(TexsynError):
    """A run configuration failed validation; message names the JSON path."""


class TrainingDivergedError(TexsynError):
    """Training produced a non-finite loss."""

    def __init__(self, step, message):
        super().__init__(message)
        self.step = step
