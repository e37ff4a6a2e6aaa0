"""Ranking metrics: ROC-AUC with tie handling, histogram export, and
parameter sweeps of the bias classifiers.

AUC is the Mann-Whitney statistic: the probability that a random fake
outranks a random real, ties counted half. Orientation of the bias
classifiers: silence durations are used raw as fakeness scores (fakes have
longer silence); amplitude features are negated (fakes start quieter).
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio_analysis import leading_max_amplitude, leading_silence_duration
from .errors import EmptyInputError, IoFailureError, ParseError, SingleClassError

SWEEP_FEATURES = ("leading_silence", "leading_max_amp")


@dataclass
class ScoreReport:
    """Scores plus labels, video-level rows and optional per-frame rows.

    entries: (source_id, score, label) with label 0=real, 1=fake.
    frames:  (source_id, frame_index, score, frame_label).
    """

    entries: list = field(default_factory=list)
    frames: list | None = None

    def score_label_arrays(self, per_frame: bool = False):
        if per_frame:
            if not self.frames:
                raise EmptyInputError("report has no per-frame rows")
            scores = np.array([row[2] for row in self.frames], dtype=np.float64)
            labels = np.array([row[3] for row in self.frames], dtype=np.int64)
        else:
            scores = np.array([row[1] for row in self.entries], dtype=np.float64)
            labels = np.array([row[2] for row in self.entries], dtype=np.int64)
        return scores, labels


def auc(scores, labels) -> float:
    """Mann-Whitney AUC via tie-averaged ranks, O(n log n).

    labels are binary (1 = fake = the class expected to score high).
    Raises SingleClassError unless both classes are present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be matching 1-D sequences")
    n_fake = int(np.sum(labels == 1))
    n_real = int(np.sum(labels == 0))
    if n_fake == 0 or n_real == 0:
        raise SingleClassError(f"need both classes, got {n_fake} fake / {n_real} real")

    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    # average rank within each tie group, 1-based
    new_group = np.empty(len(scores), dtype=bool)
    new_group[0] = True
    new_group[1:] = sorted_scores[1:] != sorted_scores[:-1]
    group_id = np.cumsum(new_group) - 1
    counts = np.bincount(group_id)
    first_rank = np.concatenate(([0], np.cumsum(counts[:-1]))) + 1
    mean_rank = first_rank + (counts - 1) / 2.0
    ranks = np.empty(len(scores), dtype=np.float64)
    ranks[order] = mean_rank[group_id]

    rank_sum_fake = float(np.sum(ranks[labels == 1]))
    return (rank_sum_fake - n_fake * (n_fake + 1) / 2.0) / (n_fake * n_real)


def auc_bruteforce(scores, labels) -> float:
    """O(n^2) pair-counting oracle; same contract as auc()."""
    scores = [float(s) for s in scores]
    labels = [int(l) for l in labels]
    fakes = [s for s, l in zip(scores, labels) if l == 1]
    reals = [s for s, l in zip(scores, labels) if l == 0]
    if not fakes or not reals:
        raise SingleClassError(f"need both classes, got {len(fakes)} fake / {len(reals)} real")
    total = 0.0
    for f in fakes:
        for r in reals:
            if f > r:
                total += 1.0
            elif f == r:
                total += 0.5
    return total / (len(fakes) * len(reals))


def histogram(values, n_bins: int, value_range: tuple) -> list:
    """Normalized histogram: list of (bin_center, fraction), fractions sum to 1.

    Values outside the range are clipped into the edge bins.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("histogram of an empty value list")
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    lo, hi = float(value_range[0]), float(value_range[1])
    if not lo < hi:
        raise ValueError("range must satisfy lo < hi")
    clipped = np.clip(values, lo, hi)
    counts, edges = np.histogram(clipped, bins=n_bins, range=(lo, hi))
    fractions = counts / counts.sum()
    centers = (edges[:-1] + edges[1:]) / 2.0
    return list(zip(centers.tolist(), fractions.tolist()))


def _bias_score(clip, feature: str, param: float) -> float:
    if feature == "leading_silence":
        return leading_silence_duration(clip, param)
    if feature == "leading_max_amp":
        return -leading_max_amplitude(clip, param)
    raise ValueError(f"unknown sweep feature {feature!r}; expected one of {SWEEP_FEATURES}")


def sweep_auc(clips, labels, feature: str, grid, threads: int = 0) -> list:
    """AUC of one bias classifier at each parameter value in the grid.

    feature "leading_silence" sweeps the silence threshold tau;
    "leading_max_amp" sweeps the window length delta (score negated).
    Returns (param, auc) pairs sorted by param.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must be non-empty")
    labels = list(labels)

    def point(param: float):
        scores = [_bias_score(clip, feature, param) for clip in clips]
        return param, auc(scores, labels)

    if threads == 1 or len(grid) == 1:
        results = [point(g) for g in grid]
    else:
        workers = threads if threads > 0 else None
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(point, grid))
    return sorted(results)


# ---------------------------------------------------------------------------
# Scores CSV (the stable CLI contract)
# ---------------------------------------------------------------------------

VIDEO_SCORE_COLUMNS = ("source_id", "score", "label")
FRAME_SCORE_COLUMNS = ("source_id", "frame_index", "score", "frame_label")


def write_scores_csv(report: ScoreReport, path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(VIDEO_SCORE_COLUMNS)
            for source_id, score, label in report.entries:
                writer.writerow([source_id, f"{score:.9g}", label])
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def write_frame_scores_csv(report: ScoreReport, path) -> None:
    if report.frames is None:
        raise EmptyInputError("report has no per-frame rows")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(FRAME_SCORE_COLUMNS)
            for source_id, frame_index, score, frame_label in report.frames:
                writer.writerow([source_id, frame_index, f"{score:.9g}", frame_label])
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def read_scores_csv(path, score_column: str = "score", label_column: str = "label"):
    """Read (scores, labels) from a CSV with named columns.

    Amplitude-named score columns are negated so that higher always means
    more fake, matching the sweep orientation.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ParseError("scores CSV has no header row")
            missing = {score_column, label_column} - set(reader.fieldnames)
            if missing:
                raise ParseError(f"scores CSV missing columns {sorted(missing)}")
            scores, labels = [], []
            for line_number, row in enumerate(reader, start=2):
                try:
                    scores.append(float(row[score_column]))
                    labels.append(int(row[label_column]))
                except (TypeError, ValueError) as exc:
                    raise ParseError(f"bad row ({exc})", line_number) from None
    except OSError as exc:
        raise IoFailureError(f"cannot open {path}: {exc}") from exc
    sign = -1.0 if score_column.endswith("amplitude") else 1.0
    return [sign * s for s in scores], labels
