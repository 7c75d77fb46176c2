"""Exception types raised by the EOG removal pipeline."""


class EogRemovalError(Exception):
    """Base class for every error raised by this project."""


class InsufficientSamplesError(EogRemovalError, ValueError):
    pass


class NotSymmetricError(EogRemovalError, ValueError):
    pass


class ZeroVarianceError(EogRemovalError, ValueError):
    pass


class LengthMismatchError(EogRemovalError, ValueError):
    pass


class DimensionError(EogRemovalError, ValueError):
    pass


class InvalidStdError(EogRemovalError, ValueError):
    pass


class SingularCovarianceError(EogRemovalError, ValueError):
    pass


class NoCacheError(EogRemovalError, ValueError):
    pass


class NoDataError(EogRemovalError, ValueError):
    pass


class BadBandEdgesError(EogRemovalError, ValueError):
    pass


class RankDeficientError(EogRemovalError, ValueError):
    pass


class SegmentationError(EogRemovalError, ValueError):
    pass


class RecordingFormatError(EogRemovalError, ValueError):
    """A recording file could not be parsed.

    ``line`` is the 1-based line number in the file (the header is line 1), or
    None when the problem is not tied to a single line.
    """

    def __init__(self, message: str, line: int = None):
        if line is not None:
            message = "line {}: {}".format(line, message)
        super().__init__(message)
        self.line = line


class ModelFormatError(EogRemovalError, ValueError):
    pass


class ConfigError(EogRemovalError, ValueError):
    pass


class JsonFormatError(EogRemovalError, ValueError):
    """A JSON file written by an earlier stage could not be read back."""
