"""Mono RIFF/WAVE decoding and encoding.

Supported encodings are the two uncompressed `fmt ` codes: 1 (16-bit signed
PCM) and 3 (32-bit IEEE float), single channel, little-endian. Everything
else is rejected so silence measurements are never run on a silently
downmixed or re-quantized signal.

16-bit samples map to amplitude as ``n / 32768`` so that -32768 decodes to
exactly -1.0; the missing +1.0 at full scale is accepted. Samples are held
as float32, which represents every PCM16 amplitude exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyClipError,
    IoFailureError,
    MalformedHeaderError,
    TruncatedDataError,
    UnsupportedEncodingError,
)

WAVE_FORMAT_PCM = 1
WAVE_FORMAT_IEEE_FLOAT = 3

PCM16_SCALE = 32768.0


@dataclass
class AudioClip:
    """A mono waveform: float amplitudes in [-1, 1] plus its sample rate."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    def require_nonempty(self) -> None:
        if len(self.samples) == 0:
            raise EmptyClipError(f"clip {self.source_id!r} has no samples")


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) < n:
        raise TruncatedDataError(f"unexpected end of file while reading {what}")
    return data


def read_wav(path_or_file, source_id: str | None = None) -> AudioClip:
    """Decode a mono PCM16 or float32 WAV file into an AudioClip.

    Accepts a filesystem path or a binary file-like object. Raises
    MalformedHeaderError, UnsupportedEncodingError, or TruncatedDataError
    on anything outside the supported subset; decoding the same bytes
    always produces the same samples.
    """
    if hasattr(path_or_file, "read"):
        return _read_wav_stream(path_or_file, source_id or "")
    try:
        with open(path_or_file, "rb") as fh:
            return _read_wav_stream(fh, source_id or str(path_or_file))
    except OSError as exc:
        raise IoFailureError(f"cannot open {path_or_file}: {exc}") from exc


def _read_wav_stream(fh, source_id: str) -> AudioClip:
    riff = fh.read(12)
    if len(riff) < 12:
        raise MalformedHeaderError("file shorter than a RIFF header")
    tag, _riff_size, wave = struct.unpack("<4sI4s", riff)
    if tag != b"RIFF" or wave != b"WAVE":
        raise MalformedHeaderError("not a RIFF/WAVE file")

    fmt = None
    data = None
    while True:
        head = fh.read(8)
        if len(head) == 0:
            break
        if len(head) < 8:
            if fmt is not None and data is not None:
                break  # tolerate trailing junk shorter than a chunk header
            raise MalformedHeaderError("truncated chunk header")
        chunk_id, chunk_size = struct.unpack("<4sI", head)
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise MalformedHeaderError("fmt chunk too small")
            body = _read_exact(fh, chunk_size, "fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif chunk_id == b"data":
            data = _read_exact(fh, chunk_size, "data chunk")
        else:
            _read_exact(fh, chunk_size, f"chunk {chunk_id!r}")
        if chunk_size % 2 == 1:  # chunks are word-aligned
            fh.read(1)
        if fmt is not None and data is not None:
            break

    if fmt is None or data is None:
        raise MalformedHeaderError("missing fmt or data chunk")

    format_code, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if sample_rate <= 0:
        raise MalformedHeaderError("non-positive sample rate")
    if channels != 1:
        raise UnsupportedEncodingError(f"{channels} channels; only mono is supported")
    if format_code == WAVE_FORMAT_PCM:
        if bits != 16:
            raise UnsupportedEncodingError(f"{bits}-bit PCM; only 16-bit is supported")
        if len(data) % 2 != 0:
            raise TruncatedDataError("PCM16 data chunk has an odd byte count")
        samples = np.frombuffer(data, dtype="<i2").astype(np.float32) / PCM16_SCALE
    elif format_code == WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncodingError(f"{bits}-bit float; only 32-bit is supported")
        if len(data) % 4 != 0:
            raise TruncatedDataError("float32 data chunk size is not a multiple of 4")
        samples = np.frombuffer(data, dtype="<f4").astype(np.float32)
    else:
        raise UnsupportedEncodingError(f"format code {format_code}; only PCM and IEEE float")

    return AudioClip(samples=samples, sample_rate=sample_rate, source_id=source_id)


def write_wav(clip: AudioClip, path_or_file, encoding: str = "float32") -> None:
    """Encode a clip as a mono WAV file.

    ``encoding="float32"`` round-trips samples bit-exactly; ``"pcm16"``
    quantizes to within one step of 1/32768.
    """
    if encoding not in ("pcm16", "float32"):
        raise ValueError(f"unknown encoding {encoding!r}")
    if not np.all(np.isfinite(clip.samples)):
        raise ValueError("clip contains non-finite samples")
    if len(clip.samples) and float(np.max(np.abs(clip.samples))) > 1.0:
        raise ValueError("clip amplitudes exceed [-1, 1]")

    if encoding == "pcm16":
        format_code, bits = WAVE_FORMAT_PCM, 16
        quantized = np.clip(np.rint(clip.samples.astype(np.float64) * PCM16_SCALE), -32768, 32767)
        payload = quantized.astype("<i2").tobytes()
    else:
        format_code, bits = WAVE_FORMAT_IEEE_FLOAT, 32
        payload = clip.samples.astype("<f4").tobytes()

    block_align = bits // 8
    byte_rate = clip.sample_rate * block_align
    header = b"".join(
        [
            struct.pack("<4sI4s", b"RIFF", 36 + len(payload), b"WAVE"),
            struct.pack(
                "<4sIHHIIHH",
                b"fmt ",
                16,
                format_code,
                1,
                clip.sample_rate,
                byte_rate,
                block_align,
                bits,
            ),
            struct.pack("<4sI", b"data", len(payload)),
        ]
    )

    if hasattr(path_or_file, "write"):
        path_or_file.write(header + payload)
        return
    try:
        with open(path_or_file, "wb") as fh:
            fh.write(header + payload)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path_or_file}: {exc}") from exc
