"""Extraction jobs: media in, AVHF v1 feature file out."""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import avhf
from .backends import FPS
from .errors import EmptyStreamError
from .media import read_wav_mono


@dataclass
class ExtractionJob:
    media_path: str
    output_path: str
    source_id: str = ""


def extract(job: ExtractionJob, backend) -> str:
    """Run one job; returns the output path.

    The two streams are equalized by truncation to the shorter one;
    truncation never fabricates frames.
    """
    samples, rate = read_wav_mono(job.media_path)
    audio, video = backend.extract(samples, rate)
    t = min(audio.shape[0], video.shape[0])
    if t == 0:
        raise EmptyStreamError(f"{job.media_path}: no full frames at {FPS} fps")
    parent = os.path.dirname(os.path.abspath(job.output_path))
    os.makedirs(parent, exist_ok=True)
    avhf.write(job.output_path, audio[:t], video[:t], fps=FPS)
    return job.output_path
