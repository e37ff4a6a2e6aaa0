"""AVHF v1 container, written byte-for-byte to the published contract.

Layout (little-endian): magic "AVHF", u32 version=1, u32 T, u32 D_a,
u32 D_v, f32 fps, then T*D_a f32 audio values row-major, then T*D_v f32
video values row-major. This module is intentionally independent of the
consumer toolkit; the byte layout is the interface.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"AVHF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIf")


def write(path, audio, video, fps=25.0):
    audio = np.ascontiguousarray(audio, dtype="<f4")
    video = np.ascontiguousarray(video, dtype="<f4")
    if audio.ndim != 2 or video.ndim != 2 or audio.shape[0] != video.shape[0]:
        raise ValueError("audio and video must be 2-D with a shared frame count")
    if not (np.all(np.isfinite(audio)) and np.all(np.isfinite(video))):
        raise ValueError("refusing to write non-finite feature values")
    t, d_a = audio.shape
    d_v = video.shape[1]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, t, d_a, d_v, fps))
        fh.write(audio.tobytes())
        fh.write(video.tobytes())


def read_header(path):
    """(T, D_a, D_v, fps) of an existing file; used for self-checks."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise ValueError("file shorter than an AVHF header")
    magic, version, t, d_a, d_v, fps = _HEADER.unpack(header)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"not an AVHF v{VERSION} file")
    return t, d_a, d_v, fps
