"""Typed failures of the extraction bridge (CLI exit code 2)."""


class BridgeError(Exception):
    pass


class DecodeFailureError(BridgeError):
    """Input media could not be decoded."""


class EmptyStreamError(BridgeError):
    """Decoded media holds no usable frames."""


class CheckpointMissingError(BridgeError):
    """The pretrained checkpoint file is not present."""


class BackendUnavailableError(BridgeError):
    """The selected backend's runtime dependencies are not installed."""
