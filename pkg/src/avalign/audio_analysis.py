"""Waveform bias battery: leading/trailing silence, early-window amplitude,
global volume, and the trimming operations that remove the leading shortcut.

"Silence" is strict: a sample whose magnitude is exactly equal to the
threshold still counts as silent. All second-to-sample conversions use
round-half-up so results are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import TooShortError
from .feature_io import FeatureSequencePair
from .util import round_half_up


@dataclass(frozen=True)
class AuditConfig:
    """Default knobs for the bias battery."""

    silence_threshold_tau: float = 5e-4
    leading_window_delta_s: float = 0.030
    trim_duration_s: float = 0.040
    fps: float = 25.0

    def __post_init__(self):
        if self.silence_threshold_tau <= 0:
            raise ValueError("silence_threshold_tau must be positive")
        if self.leading_window_delta_s <= 0:
            raise ValueError("leading_window_delta_s must be positive")
        if self.trim_duration_s < 0:
            raise ValueError("trim_duration_s must be non-negative")
        if self.fps <= 0:
            raise ValueError("fps must be positive")


@dataclass(frozen=True)
class BiasFeatureVector:
    leading_silence_s: float
    leading_max_amplitude: float
    trailing_silence_s: float
    global_max_amplitude: float

    FIELDS = (
        "leading_silence_s",
        "leading_max_amplitude",
        "trailing_silence_s",
        "global_max_amplitude",
    )


def leading_silence_duration(clip: AudioClip, tau: float) -> float:
    """Seconds until the first sample whose magnitude exceeds tau.

    Returns the full clip duration when no sample exceeds the threshold.
    """
    clip.require_nonempty()
    if tau <= 0:
        raise ValueError("tau must be positive")
    loud = np.flatnonzero(np.abs(clip.samples) > tau)
    if loud.size == 0:
        return clip.duration_seconds
    return int(loud[0]) / clip.sample_rate


def trailing_silence_duration(clip: AudioClip, tau: float) -> float:
    """Mirror of leading_silence_duration measured from the end backwards."""
    clip.require_nonempty()
    if tau <= 0:
        raise ValueError("tau must be positive")
    loud = np.flatnonzero(np.abs(clip.samples) > tau)
    if loud.size == 0:
        return clip.duration_seconds
    return (len(clip.samples) - 1 - int(loud[-1])) / clip.sample_rate


def leading_max_amplitude(clip: AudioClip, delta_s: float) -> float:
    """Maximum magnitude over the first ``delta_s`` seconds.

    The window is round(delta_s * rate) samples, clamped to the clip length;
    an empty window yields 0.0.
    """
    clip.require_nonempty()
    if delta_s <= 0:
        raise ValueError("delta_s must be positive")
    n = min(round_half_up(delta_s * clip.sample_rate), len(clip.samples))
    if n <= 0:
        return 0.0
    return float(np.max(np.abs(clip.samples[:n])))


def bias_features(clip: AudioClip, cfg: AuditConfig = AuditConfig()) -> BiasFeatureVector:
    """All four bias features of one clip."""
    clip.require_nonempty()
    return BiasFeatureVector(
        leading_silence_s=leading_silence_duration(clip, cfg.silence_threshold_tau),
        leading_max_amplitude=leading_max_amplitude(clip, cfg.leading_window_delta_s),
        trailing_silence_s=trailing_silence_duration(clip, cfg.silence_threshold_tau),
        global_max_amplitude=float(np.max(np.abs(clip.samples))),
    )


def trim_leading(clip: AudioClip, trim_s: float) -> AudioClip:
    """Drop the first round(trim_s * rate) samples; an empty result is valid."""
    if trim_s < 0:
        raise ValueError("trim_s must be non-negative")
    n = min(round_half_up(trim_s * clip.sample_rate), len(clip.samples))
    return AudioClip(
        samples=clip.samples[n:].copy(),
        sample_rate=clip.sample_rate,
        source_id=clip.source_id,
    )


def trim_features(pair: FeatureSequencePair, n_frames: int) -> FeatureSequencePair:
    """Drop the first n_frames rows from both feature streams.

    Raises TooShortError when nothing would remain; downstream scoring
    needs at least one frame.
    """
    if n_frames < 0:
        raise ValueError("n_frames must be non-negative")
    t = pair.audio.shape[0]
    if n_frames >= t and n_frames > 0:
        raise TooShortError(f"trimming {n_frames} frames of {t} leaves no data")
    if n_frames == 0:
        return pair
    return FeatureSequencePair(
        audio=pair.audio[n_frames:].copy(),
        video=pair.video[n_frames:].copy(),
        fps=pair.fps,
        source_id=pair.source_id,
    )
