"""Typed exception hierarchy for every data-dependent failure.

All subclasses of :class:`ToolkitError` map to CLI exit code 2 (bad data /
failed validation). Violated call preconditions raise plain ``ValueError``
instead and count as programming errors (exit code 3 if they escape).
"""


class ToolkitError(Exception):
    """Base class for typed toolkit failures."""


# audio container
class MalformedHeaderError(ToolkitError):
    """Container magic or chunk structure does not match the format."""


class UnsupportedEncodingError(ToolkitError):
    """Recognized container but an encoding outside the supported subset."""


class TruncatedDataError(ToolkitError):
    """Declared payload length exceeds the bytes actually present."""


class IoFailureError(ToolkitError):
    """Underlying read/write failed."""


# waveform analysis
class EmptyClipError(ToolkitError):
    """Operation requires at least one sample."""


class TooShortError(ToolkitError):
    """Sequence would be left with no frames."""


# metrics
class SingleClassError(ToolkitError):
    """AUC needs at least one example of each class."""


class EmptyInputError(ToolkitError):
    """Operation requires a non-empty value list."""


# feature container / manifest
class VersionMismatchError(ToolkitError):
    """Feature file written by an incompatible format version."""


class NonFiniteValueError(ToolkitError):
    """Refusing to serialize NaN or infinite values."""


class ParseError(ToolkitError):
    """Malformed manifest text; carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DuplicateIdError(ToolkitError):
    """Two manifest records share a source_id."""


class InvalidCategoryError(ToolkitError):
    """Category outside RVRA/RVFA/FVRA/FVFA."""


class BadSegmentError(ToolkitError):
    """Fake segments violate ordering, bounds, or the real-category rule."""


# model / training
class DimensionMismatchError(ToolkitError):
    """Feature width does not match the network input width."""


class EmptyDatasetError(ToolkitError):
    """Training requires non-empty train and validation sets."""


class FakeInUnsupervisedError(ToolkitError):
    """A non-RVRA record reached the real-only trainer."""


class MissingFeatureFileError(ToolkitError):
    """A manifest record points at a feature file that does not exist."""
