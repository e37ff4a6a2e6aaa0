"""avbridge: media to AVHF feature extraction."""

__version__ = "0.1.0"

from .backends import AvHubertBackend, DeterministicBackend, make_backend
from .extract import ExtractionJob, extract

__all__ = [
    "AvHubertBackend",
    "DeterministicBackend",
    "ExtractionJob",
    "extract",
    "make_backend",
]
