"""Feature extraction backends.

A backend turns a decoded waveform into two per-frame feature streams at
25 fps: the audio stream computed with the visual input masked, and the
visual stream computed with the audio input masked. Both streams are
truncated to the shorter frame count by the caller.

`DeterministicBackend` is a pretrained-model stand-in: its features are a
pure function of the frame content, so the whole pipeline (framing, the
masking split, container conformance, byte-stable repeats) can be exercised
and verified on any machine. `AvHubertBackend` adapts a locally available
pretrained audio-visual transformer checkpoint; the model itself is an
external dependency, not part of this package.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from .errors import BackendUnavailableError, CheckpointMissingError

FPS = 25.0
FEATURE_DIM = 1024


def _frame_count(n_samples: int, rate: int) -> int:
    return int(n_samples // (rate / FPS))


class DeterministicBackend:
    """Content-hash features: byte-identical for identical input."""

    name = "deterministic"

    def __init__(self, dim: int = FEATURE_DIM, layer_index: int = -1):
        self.dim = dim
        self.layer_index = layer_index

    def _frame_vector(self, frame: np.ndarray, stream: str) -> np.ndarray:
        digest = hashlib.blake2b(
            frame.tobytes() + f"|{stream}|layer={self.layer_index}".encode(),
            digest_size=16,
        ).digest()
        seed = int.from_bytes(digest, "little")
        vector = np.random.default_rng(seed).standard_normal(self.dim)
        # anchor the leading components to real frame statistics
        vector[0] = float(np.sqrt(np.mean(frame * frame)))
        vector[1] = float(np.max(np.abs(frame))) if frame.size else 0.0
        return vector.astype(np.float32)

    def extract(self, samples: np.ndarray, rate: int):
        hop = rate / FPS
        t = _frame_count(len(samples), rate)
        audio = np.empty((t, self.dim), dtype=np.float32)
        video = np.empty((t, self.dim), dtype=np.float32)
        for i in range(t):
            frame = samples[int(i * hop) : int((i + 1) * hop)]
            audio[i] = self._frame_vector(frame, "audio-only")  # visual masked
            video[i] = self._frame_vector(frame, "video-only")  # audio masked
        return audio, video


class AvHubertBackend:
    """Adapter for a pretrained audio-visual transformer checkpoint.

    Requires the checkpoint file plus the external model code (torch and
    the upstream audio-visual transformer package). Raises typed errors
    when either is missing instead of degrading silently.
    """

    name = "avhubert"

    def __init__(self, checkpoint_path, layer_index: int = -1):
        if not checkpoint_path or not os.path.exists(checkpoint_path):
            raise CheckpointMissingError(
                f"checkpoint {checkpoint_path!r} not found; download the pretrained "
                "model and pass --checkpoint"
            )
        self.checkpoint_path = str(checkpoint_path)
        self.layer_index = layer_index
        try:
            import torch  # noqa: F401
        except ImportError as exc:
            raise BackendUnavailableError(
                "the avhubert backend needs torch (pip install avbridge[avhubert])"
            ) from exc
        try:
            import avhubert  # noqa: F401
        except ImportError as exc:
            raise BackendUnavailableError(
                "the avhubert backend needs the upstream av_hubert package on "
                "PYTHONPATH; see the README for the expected layout"
            ) from exc

    def extract(self, samples: np.ndarray, rate: int):
        import avhubert

        model = avhubert.load_feature_extractor(self.checkpoint_path)
        audio = model.extract(samples, rate, mask="video", layer=self.layer_index)
        video = model.extract(samples, rate, mask="audio", layer=self.layer_index)
        return np.asarray(audio, np.float32), np.asarray(video, np.float32)


def make_backend(name: str, checkpoint=None, layer_index: int = -1, dim: int = FEATURE_DIM):
    if name == "deterministic":
        return DeterministicBackend(dim=dim, layer_index=layer_index)
    if name == "avhubert":
        return AvHubertBackend(checkpoint, layer_index=layer_index)
    raise ValueError(f"unknown backend {name!r}")
