import io
import struct

import numpy as np
import pytest

from avalign.audio_io import AudioClip, read_wav, write_wav
from avalign.errors import (
    MalformedHeaderError,
    TruncatedDataError,
    UnsupportedEncodingError,
)


def make_wav_bytes(payload, format_code, channels=1, sample_rate=16000, bits=16):
    header = struct.pack("<4sI4s", b"RIFF", 36 + len(payload), b"WAVE")
    header += struct.pack(
        "<4sIHHIIHH",
        b"fmt ",
        16,
        format_code,
        channels,
        sample_rate,
        sample_rate * channels * bits // 8,
        channels * bits // 8,
        bits,
    )
    header += struct.pack("<4sI", b"data", len(payload))
    return header + payload


def test_pcm16_linear_scaling():
    payload = struct.pack("<3h", 0, 16384, -32768)
    clip = read_wav(io.BytesIO(make_wav_bytes(payload, 1)))
    assert clip.samples.tolist() == [0.0, 0.5, -1.0]
    assert clip.sample_rate == 16000


def test_float32_pass_through():
    payload = struct.pack("<f", 0.25)
    clip = read_wav(io.BytesIO(make_wav_bytes(payload, 3, bits=32)))
    assert clip.samples.tolist() == [0.25]
    assert clip.sample_rate == 16000


def test_one_second_sample_count(tmp_path):
    clip = AudioClip(np.zeros(16000, dtype=np.float32), 16000)
    path = tmp_path / "one_second.wav"
    write_wav(clip, path, encoding="pcm16")
    assert len(read_wav(path)) == 16000


def test_float32_round_trip_exact(tmp_path):
    clip = AudioClip(np.array([0.1, -0.9], dtype=np.float32), 16000, "rt")
    path = tmp_path / "rt.wav"
    write_wav(clip, path, encoding="float32")
    back = read_wav(path)
    assert np.array_equal(back.samples, clip.samples)


def test_pcm16_round_trip_representable(tmp_path):
    clip = AudioClip(np.array([0.5], dtype=np.float32), 16000)
    path = tmp_path / "half.wav"
    write_wav(clip, path, encoding="pcm16")
    assert read_wav(path).samples.tolist() == [0.5]


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_property(seed, tmp_path):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5000))
    samples = rng.uniform(-1.0, 1.0, n).astype(np.float32)
    clip = AudioClip(samples, int(rng.choice([8000, 16000, 44100])))

    f32 = tmp_path / "f32.wav"
    write_wav(clip, f32, encoding="float32")
    assert np.array_equal(read_wav(f32).samples, samples)

    p16 = tmp_path / "p16.wav"
    write_wav(clip, p16, encoding="pcm16")
    err = np.abs(read_wav(p16).samples.astype(np.float64) - samples.astype(np.float64))
    assert err.max() <= 1.0 / 32768


def test_decode_deterministic():
    payload = struct.pack("<4h", 5, -7, 300, -20000)
    raw = make_wav_bytes(payload, 1)
    a = read_wav(io.BytesIO(raw)).samples
    b = read_wav(io.BytesIO(raw)).samples
    assert np.array_equal(a, b)


def test_skips_extra_chunks():
    payload = struct.pack("<2h", 100, -100)
    header = struct.pack("<4sI4s", b"RIFF", 0, b"WAVE")
    header += struct.pack("<4sI", b"LIST", 5) + b"junk\x00" + b"\x00"  # odd size, padded
    header += struct.pack("<4sIHHIIHH", b"fmt ", 16, 1, 1, 8000, 16000, 2, 16)
    header += struct.pack("<4sI", b"data", len(payload)) + payload
    clip = read_wav(io.BytesIO(header))
    assert len(clip) == 2
    assert clip.sample_rate == 8000


def test_bad_magic_rejected():
    with pytest.raises(MalformedHeaderError):
        read_wav(io.BytesIO(b"RIFX" + b"\x00" * 40))


def test_multichannel_rejected():
    payload = struct.pack("<2h", 0, 0)
    with pytest.raises(UnsupportedEncodingError):
        read_wav(io.BytesIO(make_wav_bytes(payload, 1, channels=2)))


def test_compressed_format_rejected():
    with pytest.raises(UnsupportedEncodingError):
        read_wav(io.BytesIO(make_wav_bytes(b"\x00\x00", 85)))


def test_pcm24_rejected():
    with pytest.raises(UnsupportedEncodingError):
        read_wav(io.BytesIO(make_wav_bytes(b"\x00" * 6, 1, bits=24)))


def test_truncated_data_rejected():
    payload = struct.pack("<4h", 1, 2, 3, 4)
    raw = make_wav_bytes(payload, 1)
    with pytest.raises(TruncatedDataError):
        read_wav(io.BytesIO(raw[:-3]))


def test_missing_data_chunk_rejected():
    header = struct.pack("<4sI4s", b"RIFF", 4, b"WAVE")
    header += struct.pack("<4sIHHIIHH", b"fmt ", 16, 1, 1, 16000, 32000, 2, 16)
    with pytest.raises(MalformedHeaderError):
        read_wav(io.BytesIO(header))


def test_write_rejects_out_of_range(tmp_path):
    clip = AudioClip(np.array([1.5], dtype=np.float32), 16000)
    with pytest.raises(ValueError):
        write_wav(clip, tmp_path / "bad.wav")
