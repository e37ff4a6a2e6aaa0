"""Seeded synthetic corpora that reproduce the studied phenomena at desk scale.

Audio: real clips are i.i.d. noise whose magnitude never drops below a
configured floor, so their leading silence is exactly zero at any threshold
below the floor. Fake clips start with an exact-zero lead drawn from a
configured range, then the same noise process. The lead is exact zeros
rather than low-level noise so threshold sweeps have a known knee.

Features: each real video is a smooth latent random walk pushed through two
fixed corpus-wide linear maps (one per modality) plus noise, which makes
frame-level alignment learnable. Fakes manipulate the video stream only, so
alignment is the only separating signal; the manipulated interval is
recorded in the manifest. An optional first-frame marker writes the same
fixed latent into frame 0 of both streams of every fake: an aligned frame
that is class-correlated, the feature-space analogue of a leading-silence
shortcut.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioClip, write_wav
from .feature_io import (
    DatasetManifest,
    FeatureSequencePair,
    ManifestRecord,
    write_features,
    write_manifest,
)
from .util import round_half_up


@dataclass
class SynthAudioConfig:
    n_real: int = 500
    n_fake: int = 500
    fake_lead_silence_range_s: tuple = (0.025, 0.030)
    real_noise_floor: float = 1e-3  # keep strictly above the audit threshold
    peak_amplitude: float = 0.05
    duration_s: float = 1.0
    sample_rate: int = 16000
    seed: int = 0

    def __post_init__(self):
        if self.real_noise_floor <= 0:
            raise ValueError("real_noise_floor must be positive")
        if not self.real_noise_floor < self.peak_amplitude <= 1.0:
            raise ValueError("need noise_floor < peak_amplitude <= 1")
        lo, hi = self.fake_lead_silence_range_s
        if not 0 <= lo <= hi < self.duration_s:
            raise ValueError("fake lead range must fit inside the clip")
        if self.sample_rate <= 0 or self.duration_s <= 0:
            raise ValueError("sample_rate and duration_s must be positive")


def _noise(rng, n, floor, peak):
    # signed magnitudes log-uniform in [floor, peak]: every sample is audible
    mags = np.exp(rng.uniform(np.log(floor), np.log(peak), size=n))
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return (signs * mags).astype(np.float32)


def gen_audio_corpus(cfg: SynthAudioConfig):
    """Returns (clips, manifest); pure function of the seed."""
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.n_real + cfg.n_fake)
    n_samples = round_half_up(cfg.duration_s * cfg.sample_rate)

    clips = []
    records = []
    for i in range(cfg.n_real):
        rng = np.random.default_rng(children[i])
        source_id = f"real_{i:05d}"
        samples = _noise(rng, n_samples, cfg.real_noise_floor, cfg.peak_amplitude)
        clips.append(AudioClip(samples, cfg.sample_rate, source_id))
        records.append(
            ManifestRecord(
                source_id=source_id,
                category="RVRA",
                split="test",
                audio_path=f"wav/{source_id}.wav",
            )
        )
    lead_lo, lead_hi = cfg.fake_lead_silence_range_s
    for i in range(cfg.n_fake):
        rng = np.random.default_rng(children[cfg.n_real + i])
        source_id = f"fake_{i:05d}"
        lead_s = rng.uniform(lead_lo, lead_hi)
        n_lead = round_half_up(lead_s * cfg.sample_rate)
        samples = _noise(rng, n_samples, cfg.real_noise_floor, cfg.peak_amplitude)
        samples[:n_lead] = 0.0
        clips.append(AudioClip(samples, cfg.sample_rate, source_id))
        records.append(
            ManifestRecord(
                source_id=source_id,
                category="FVFA",
                split="test",
                audio_path=f"wav/{source_id}.wav",
                fake_segments=[(0.0, cfg.duration_s)],
            )
        )
    return clips, DatasetManifest(records=records)


def write_audio_corpus(clips, manifest: DatasetManifest, out_dir) -> str:
    """Write wav/ files and manifest.jsonl under out_dir; returns manifest path."""
    os.makedirs(os.path.join(out_dir, "wav"), exist_ok=True)
    by_id = {record.source_id: record for record in manifest}
    for clip in clips:
        write_wav(clip, os.path.join(out_dir, by_id[clip.source_id].audio_path))
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    write_manifest(manifest, manifest_path)
    return manifest_path


# ---------------------------------------------------------------------------
# Feature corpora
# ---------------------------------------------------------------------------

FAKE_MODES = ("global_shift", "segment_replace", "segment_shift")


@dataclass
class SynthFeatureConfig:
    n_real: int = 200
    n_fake: int = 50
    n_frames: int = 100
    feature_dim: int = 16
    latent_dim: int = 4
    noise_scale: float = 0.05
    smoothness: float = 0.9  # AR(1) coefficient of the latent walk
    fake_mode: str = "segment_replace"
    shift_frames: int = 5
    segment_len_range: tuple = (20, 40)
    first_frame_marker: bool = False
    fps: float = 25.0
    train_fraction: float = 0.7
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim > self.feature_dim:
            raise ValueError("latent_dim must not exceed feature_dim")
        if self.fake_mode not in FAKE_MODES:
            raise ValueError(f"fake_mode must be one of {FAKE_MODES}")
        if self.shift_frames < 1:
            raise ValueError("shift_frames must be >= 1")
        if not 0.0 <= self.smoothness < 1.0:
            raise ValueError("smoothness must be in [0, 1)")
        lo, hi = self.segment_len_range
        if not 1 <= lo <= hi < self.n_frames:
            raise ValueError("segment_len_range must fit inside the video")
        if self.train_fraction + self.val_fraction > 1.0:
            raise ValueError("train and val fractions exceed 1")


def _latent_walk(rng, n_frames, latent_dim, rho):
    z = np.empty((n_frames, latent_dim))
    z[0] = rng.standard_normal(latent_dim)
    step = np.sqrt(1.0 - rho * rho)
    for t in range(1, n_frames):
        z[t] = rho * z[t - 1] + step * rng.standard_normal(latent_dim)
    return z


def _emit(z, mapping, rng, noise_scale):
    return z @ mapping.T + noise_scale * rng.standard_normal((z.shape[0], mapping.shape[0]))


def _splits(n, train_fraction, val_fraction):
    n_train = int(round(n * train_fraction))
    n_val = int(round(n * val_fraction))
    return ["train"] * n_train + ["val"] * n_val + ["test"] * (n - n_train - n_val)


def gen_feature_corpus(cfg: SynthFeatureConfig, out_dir):
    """Write features/ files plus manifest.jsonl; returns the manifest.

    Real videos are RVRA; fakes are FVRA (only the video stream is touched).
    The manipulated interval of each fake is recorded in fake_segments; the
    first-frame marker, when enabled, is deliberately not recorded there.
    """
    root = np.random.SeedSequence(cfg.seed)
    map_seed, marker_seed, *video_seeds = root.spawn(2 + cfg.n_real + cfg.n_fake)
    map_rng = np.random.default_rng(map_seed)
    scale = 1.0 / np.sqrt(cfg.latent_dim)
    audio_map = map_rng.normal(0.0, scale, size=(cfg.feature_dim, cfg.latent_dim))
    video_map = map_rng.normal(0.0, scale, size=(cfg.feature_dim, cfg.latent_dim))
    marker_latent = np.random.default_rng(marker_seed).standard_normal(cfg.latent_dim)

    os.makedirs(os.path.join(out_dir, "features"), exist_ok=True)
    records = []
    real_splits = _splits(cfg.n_real, cfg.train_fraction, cfg.val_fraction)
    fake_splits = _splits(cfg.n_fake, cfg.train_fraction, cfg.val_fraction)

    for i in range(cfg.n_real):
        rng = np.random.default_rng(video_seeds[i])
        source_id = f"real_{i:05d}"
        z = _latent_walk(rng, cfg.n_frames, cfg.latent_dim, cfg.smoothness)
        audio = _emit(z, audio_map, rng, cfg.noise_scale)
        video = _emit(z, video_map, rng, cfg.noise_scale)
        _write_pair(out_dir, source_id, audio, video, cfg.fps)
        records.append(
            ManifestRecord(
                source_id=source_id,
                category="RVRA",
                split=real_splits[i],
                feature_path=f"features/{source_id}.avhf",
            )
        )

    for i in range(cfg.n_fake):
        rng = np.random.default_rng(video_seeds[cfg.n_real + i])
        source_id = f"fake_{i:05d}"
        z = _latent_walk(rng, cfg.n_frames, cfg.latent_dim, cfg.smoothness)
        audio = _emit(z, audio_map, rng, cfg.noise_scale)
        video = _emit(z, video_map, rng, cfg.noise_scale)
        video, segments = _apply_fake_mode(cfg, rng, z, video, video_map)
        if cfg.first_frame_marker:
            audio[0] = _emit(marker_latent[None, :], audio_map, rng, cfg.noise_scale)[0]
            video[0] = _emit(marker_latent[None, :], video_map, rng, cfg.noise_scale)[0]
        _write_pair(out_dir, source_id, audio, video, cfg.fps)
        records.append(
            ManifestRecord(
                source_id=source_id,
                category="FVRA",
                split=fake_splits[i],
                feature_path=f"features/{source_id}.avhf",
                fake_segments=segments,
            )
        )

    manifest = DatasetManifest(records=records)
    write_manifest(manifest, os.path.join(out_dir, "manifest.jsonl"))
    return manifest


def _apply_fake_mode(cfg, rng, z, video, video_map):
    n = cfg.n_frames
    if cfg.fake_mode == "global_shift":
        return np.roll(video, -cfg.shift_frames, axis=0), [(0.0, n / cfg.fps)]

    lo, hi = cfg.segment_len_range
    length = int(rng.integers(lo, hi + 1))
    # keep frame 0 intact so the marker, when present, stays separate
    start_min = 1 if cfg.first_frame_marker else 0
    if cfg.fake_mode == "segment_replace":
        start = int(rng.integers(start_min, n - length + 1))
        foreign = _latent_walk(rng, length, cfg.latent_dim, cfg.smoothness)
        video[start : start + length] = _emit(foreign, video_map, rng, cfg.noise_scale)
    else:  # segment_shift: reuse this video's own later frames
        start_max = n - length - cfg.shift_frames
        if start_max < start_min:
            raise ValueError("segment plus shift does not fit inside the video")
        start = int(rng.integers(start_min, start_max + 1))
        src = start + cfg.shift_frames
        video[start : start + length] = video[src : src + length].copy()
    return video, [(start / cfg.fps, (start + length) / cfg.fps)]


def _write_pair(out_dir, source_id, audio, video, fps):
    pair = FeatureSequencePair(
        audio=audio.astype(np.float32),
        video=video.astype(np.float32),
        fps=fps,
        source_id=source_id,
    )
    write_features(pair, os.path.join(out_dir, "features", f"{source_id}.avhf"))
