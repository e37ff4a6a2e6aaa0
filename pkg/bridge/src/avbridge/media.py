"""Media decoding for extraction jobs.

The bridge consumes pre-extracted mono WAV audio tracks (PCM 8/16/32-bit,
via the standard library). The pretrained-transformer backend applies its
own stock preprocessing to the same stream; the waveform surfaced here is
what every backend sees.
"""

from __future__ import annotations

import wave

import numpy as np

from .errors import DecodeFailureError, EmptyStreamError

_WIDTH_SCALE = {1: 128.0, 2: 32768.0, 4: 2147483648.0}
_WIDTH_DTYPE = {1: np.uint8, 2: "<i2", 4: "<i4"}


def read_wav_mono(path):
    """Returns (samples float64 in [-1, 1], sample_rate)."""
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            n_frames = fh.getnframes()
            raw = fh.readframes(n_frames)
    except (wave.Error, EOFError, OSError) as exc:
        raise DecodeFailureError(f"cannot decode {path}: {exc}") from exc

    if channels != 1:
        raise DecodeFailureError(f"{path}: {channels} channels, expected mono")
    if width not in _WIDTH_SCALE:
        raise DecodeFailureError(f"{path}: unsupported sample width {width}")
    if n_frames == 0:
        raise EmptyStreamError(f"{path}: no audio frames")

    data = np.frombuffer(raw, dtype=_WIDTH_DTYPE[width]).astype(np.float64)
    if width == 1:  # 8-bit WAV is unsigned
        data -= 128.0
    return data / _WIDTH_SCALE[width], rate
