"""Binary container for paired per-frame features plus the dataset manifest.

Feature file layout (all little-endian):

    bytes 0..3    magic "AVHF"
    bytes 4..7    u32 format version (currently 1)
    bytes 8..11   u32 T (frame count)
    bytes 12..15  u32 D_a (audio feature width)
    bytes 16..19  u32 D_v (video feature width)
    bytes 20..23  f32 fps
    then          T*D_a f32 audio values, row-major
    then          T*D_v f32 video values, row-major

The audio and video blocks are contiguous so unimodal readers can seek once.
Finiteness is checked on write, not on read. The manifest is line-delimited
JSON, one record object per line. Both formats are the bridge contract and
must stay bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadSegmentError,
    DuplicateIdError,
    InvalidCategoryError,
    IoFailureError,
    MalformedHeaderError,
    NonFiniteValueError,
    ParseError,
    TruncatedDataError,
    VersionMismatchError,
)

FEATURE_MAGIC = b"AVHF"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIIIIf")  # magic, version, T, D_a, D_v, fps

CATEGORIES = ("RVRA", "RVFA", "FVRA", "FVFA")
REAL_CATEGORY = "RVRA"
SPLITS = ("train", "val", "test")


@dataclass
class FeatureSequencePair:
    """Per-frame audio features a_i and video features v_i for one video."""

    audio: np.ndarray  # (T, D_a) float32
    video: np.ndarray  # (T, D_v) float32
    fps: float = 25.0
    source_id: str = ""

    def __post_init__(self):
        self.audio = np.ascontiguousarray(self.audio, dtype=np.float32)
        self.video = np.ascontiguousarray(self.video, dtype=np.float32)
        if self.audio.ndim != 2 or self.video.ndim != 2:
            raise ValueError("feature blocks must be 2-D (frames x width)")
        if self.audio.shape[0] != self.video.shape[0]:
            raise ValueError(
                f"audio has {self.audio.shape[0]} frames, video {self.video.shape[0]}"
            )
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def n_frames(self) -> int:
        return self.audio.shape[0]


def write_features(pair: FeatureSequencePair, path_or_file) -> None:
    """Serialize a pair; read_features(write_features(p)) is bit-identical."""
    if not (np.all(np.isfinite(pair.audio)) and np.all(np.isfinite(pair.video))):
        raise NonFiniteValueError(f"pair {pair.source_id!r} contains NaN or Inf")
    t, d_a = pair.audio.shape
    d_v = pair.video.shape[1]
    blob = b"".join(
        [
            _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, t, d_a, d_v, pair.fps),
            pair.audio.astype("<f4", copy=False).tobytes(),
            pair.video.astype("<f4", copy=False).tobytes(),
        ]
    )
    if hasattr(path_or_file, "write"):
        path_or_file.write(blob)
        return
    try:
        with open(path_or_file, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path_or_file}: {exc}") from exc


def read_features(path_or_file, source_id: str | None = None) -> FeatureSequencePair:
    """Parse a feature file; corrupt input raises a typed error, never crashes."""
    if hasattr(path_or_file, "read"):
        return _read_features_stream(path_or_file, source_id or "")
    try:
        with open(path_or_file, "rb") as fh:
            return _read_features_stream(fh, source_id or _stem(path_or_file))
    except OSError as exc:
        raise IoFailureError(f"cannot open {path_or_file}: {exc}") from exc


def _stem(path) -> str:
    name = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    return name.rsplit(".", 1)[0]


def _read_features_stream(fh, source_id: str) -> FeatureSequencePair:
    header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise TruncatedDataError("file shorter than the feature header")
    magic, version, t, d_a, d_v, fps = _HEADER.unpack(header)
    if magic != FEATURE_MAGIC:
        raise MalformedHeaderError(f"bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise VersionMismatchError(f"version {version}, expected {FEATURE_VERSION}")
    if not np.isfinite(fps) or fps <= 0:
        raise MalformedHeaderError(f"invalid fps {fps!r}")

    # Sizes are validated against the bytes actually present before any
    # allocation, so a fuzzed header cannot request a giant buffer.
    expected = 4 * (t * d_a + t * d_v)
    body = fh.read()
    if len(body) < expected:
        raise TruncatedDataError(
            f"payload holds {len(body)} bytes, header declares {expected}"
        )
    if len(body) > expected:
        raise MalformedHeaderError(f"{len(body) - expected} trailing bytes after payload")

    audio = np.frombuffer(body[: 4 * t * d_a], dtype="<f4").reshape(t, d_a)
    video = np.frombuffer(body[4 * t * d_a :], dtype="<f4").reshape(t, d_v)
    return FeatureSequencePair(
        audio=audio.copy(), video=video.copy(), fps=float(fps), source_id=source_id
    )


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass
class ManifestRecord:
    source_id: str
    category: str
    split: str
    feature_path: str | None = None
    audio_path: str | None = None
    fake_segments: list = field(default_factory=list)

    def validate(self) -> None:
        if not self.source_id:
            raise ParseError("empty source_id")
        if self.category not in CATEGORIES:
            raise InvalidCategoryError(f"{self.source_id}: category {self.category!r}")
        if self.split not in SPLITS:
            raise ParseError(f"{self.source_id}: split {self.split!r}")
        if self.category == REAL_CATEGORY and self.fake_segments:
            raise BadSegmentError(f"{self.source_id}: real record with fake segments")
        prev_end = 0.0
        for seg in self.fake_segments:
            if len(seg) != 2:
                raise BadSegmentError(f"{self.source_id}: segment {seg!r} is not a pair")
            start, end = float(seg[0]), float(seg[1])
            if start < 0 or end <= start:
                raise BadSegmentError(f"{self.source_id}: bad segment ({start}, {end})")
            if start < prev_end:
                raise BadSegmentError(f"{self.source_id}: overlapping or unordered segments")
            prev_end = end


@dataclass
class DatasetManifest:
    records: list

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def by_split(self, split: str) -> list:
        return [r for r in self.records if r.split == split]

    def real_records(self) -> list:
        return [r for r in self.records if r.category == REAL_CATEGORY]

    def get(self, source_id: str) -> ManifestRecord:
        for r in self.records:
            if r.source_id == source_id:
                return r
        raise KeyError(source_id)


def binary_label(category: str) -> int:
    """0 for RVRA, 1 for every fake category."""
    if category not in CATEGORIES:
        raise InvalidCategoryError(f"category {category!r}")
    return 0 if category == REAL_CATEGORY else 1


def frame_labels(record: ManifestRecord, n_frames: int, fps: float) -> np.ndarray:
    """Per-frame binary labels: frame i is fake iff [i/fps, (i+1)/fps) overlaps a segment."""
    labels = np.zeros(n_frames, dtype=np.int8)
    for start, end in record.fake_segments:
        lo = int(np.floor(start * fps))
        hi = int(np.ceil(end * fps))
        for i in range(max(0, lo), min(n_frames, hi)):
            if start < (i + 1) / fps and end > i / fps:
                labels[i] = 1
    return labels


_RECORD_KEYS = {"source_id", "category", "split", "feature_path", "audio_path", "fake_segments"}


def read_manifest(path_or_file) -> DatasetManifest:
    """Parse a line-delimited manifest, validating every record invariant."""
    if hasattr(path_or_file, "read"):
        raw = path_or_file.read()
        data = raw if isinstance(raw, bytes) else raw.encode("utf-8")
    else:
        try:
            with open(path_or_file, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise IoFailureError(f"cannot open {path_or_file}: {exc}") from exc

    records = []
    seen = set()
    for line_number, raw_line in enumerate(data.split(b"\n"), start=1):
        if not raw_line.strip():
            continue
        try:
            text = raw_line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8 ({exc})", line_number) from exc
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", line_number) from exc
        if not isinstance(obj, dict):
            raise ParseError("record is not an object", line_number)
        unknown = set(obj) - _RECORD_KEYS
        if unknown:
            raise ParseError(f"unknown keys {sorted(unknown)}", line_number)
        try:
            record = ManifestRecord(
                source_id=_req_str(obj, "source_id", line_number),
                category=_req_str(obj, "category", line_number),
                split=_req_str(obj, "split", line_number),
                feature_path=_opt_str(obj, "feature_path", line_number),
                audio_path=_opt_str(obj, "audio_path", line_number),
                fake_segments=_segments(obj.get("fake_segments", []), line_number),
            )
        except ParseError:
            raise
        record.validate()
        if record.source_id in seen:
            raise DuplicateIdError(f"duplicate source_id {record.source_id!r}")
        seen.add(record.source_id)
        records.append(record)
    return DatasetManifest(records=records)


def _req_str(obj, key, line_number):
    value = obj.get(key)
    if not isinstance(value, str):
        raise ParseError(f"{key} missing or not a string", line_number)
    return value


def _opt_str(obj, key, line_number):
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise ParseError(f"{key} must be a string", line_number)
    return value


def _segments(value, line_number):
    if not isinstance(value, list):
        raise ParseError("fake_segments must be a list", line_number)
    segments = []
    for seg in value:
        if not isinstance(seg, (list, tuple)) or len(seg) != 2:
            raise BadSegmentError(f"segment {seg!r} is not a [start, end] pair")
        try:
            segments.append((float(seg[0]), float(seg[1])))
        except (TypeError, ValueError):
            raise BadSegmentError(f"segment {seg!r} has non-numeric bounds") from None
    return segments


def write_manifest(manifest: DatasetManifest, path_or_file) -> None:
    lines = []
    seen = set()
    for record in manifest.records:
        record.validate()
        if record.source_id in seen:
            raise DuplicateIdError(f"duplicate source_id {record.source_id!r}")
        seen.add(record.source_id)
        obj = {
            "source_id": record.source_id,
            "category": record.category,
            "split": record.split,
            "fake_segments": [[s, e] for s, e in record.fake_segments],
        }
        if record.feature_path is not None:
            obj["feature_path"] = record.feature_path
        if record.audio_path is not None:
            obj["audio_path"] = record.audio_path
        lines.append(json.dumps(obj, sort_keys=True))
    text = "\n".join(lines) + ("\n" if lines else "")
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
        return
    try:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path_or_file}: {exc}") from exc
