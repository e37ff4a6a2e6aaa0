"""Optimization loops for the alignment scorer.

Unsupervised mode fits the windowed contrastive objective on real-category
videos only (enforced, not assumed) with an Adam optimizer, a reduce-on-
plateau schedule, and early stopping. Supervised mode fits the pooled
binary cross-entropy with a fixed learning rate. An epoch is one pass over
all training videos in seeded shuffled order; a batch is a set of whole
videos whose per-video gradients are averaged so long videos do not
dominate. "Improvement" means a strict decrease of the validation loss.
Everything is a deterministic function of (seed, config, data).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import alignment
from .alignment import AlignmentNetwork, LossConfig, create_network
from .audio_analysis import trim_features
from .errors import (
    EmptyDatasetError,
    FakeInUnsupervisedError,
    MissingFeatureFileError,
    SingleClassError,
)
from .feature_io import (
    REAL_CATEGORY,
    binary_label,
    frame_labels,
    read_features,
)
from .metrics import ScoreReport

log = logging.getLogger(__name__)

MODES = ("unsupervised", "supervised")
DEFAULT_LEARNING_RATES = {"unsupervised": 1e-5, "supervised": 1e-3}


@dataclass
class TrainConfig:
    mode: str = "unsupervised"
    learning_rate: float | None = None  # per-mode default when None
    scheduler_patience: int = 5
    scheduler_factor: float = 0.1
    early_stop_patience: int = 10
    batch_size: int = 8
    max_epochs: int = 200
    seed: int = 0
    head: str = "mlp"
    hidden_dims: tuple = alignment.DEFAULT_HIDDEN_DIMS
    normalize_inputs: bool = True
    neighborhood_half_width: int = 15
    pooling: str = "logsumexp"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.learning_rate is not None and self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.scheduler_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.hidden_dims = tuple(int(d) for d in self.hidden_dims)

    def resolved_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LEARNING_RATES[self.mode]

    def loss_config(self) -> LossConfig:
        return LossConfig(
            neighborhood_half_width=self.neighborhood_half_width, pooling=self.pooling
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d


@dataclass
class TrainReport:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    learning_rates: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    best_val_loss: float = float("inf")
    checkpoint_path: str | None = None

    @property
    def n_epochs(self) -> int:
        return len(self.train_losses)


def default_loader(record, base_dir=None):
    """Read the feature file a manifest record points at."""
    if record.feature_path is None:
        raise MissingFeatureFileError(f"{record.source_id}: record has no feature_path")
    path = record.feature_path
    if base_dir is not None:
        path = os.path.join(base_dir, path)
    if not os.path.exists(path):
        raise MissingFeatureFileError(f"{record.source_id}: {path} does not exist")
    return read_features(path, source_id=record.source_id)


class _Adam:
    """Standard adaptive-moment optimizer over one flat parameter vector."""

    def __init__(self, size, dtype, beta1, beta2, eps):
        self.m = np.zeros(size, dtype=dtype)
        self.v = np.zeros(size, dtype=dtype)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params, grad, lr):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _video_objective(cfg, net, pair, label, loss_cfg):
    if cfg.mode == "unsupervised":
        return alignment.video_loss_gradient(net, pair, loss_cfg)
    return alignment.supervised_loss_gradient(net, pair, label)


def _validation_loss(cfg, net, pairs, labels, loss_cfg) -> float:
    losses = []
    for pair, label in zip(pairs, labels):
        if cfg.mode == "unsupervised":
            losses.append(alignment.video_loss(net, pair, loss_cfg))
        else:
            losses.append(alignment.supervised_loss(net, pair, label))
    return float(np.mean(losses))


def train(
    cfg: TrainConfig,
    train_records,
    val_records,
    base_dir=None,
    loader=None,
    checkpoint_path=None,
):
    """Fit a network; returns (best network, TrainReport).

    The returned network is the checkpoint with minimal validation loss.
    Unsupervised mode refuses any non-real record outright.
    """
    train_records = list(train_records)
    val_records = list(val_records)
    if not train_records or not val_records:
        raise EmptyDatasetError(
            f"need non-empty train ({len(train_records)}) and val ({len(val_records)}) sets"
        )
    if cfg.mode == "unsupervised":
        for record in train_records + val_records:
            if record.category != REAL_CATEGORY:
                raise FakeInUnsupervisedError(
                    f"{record.source_id} has category {record.category}"
                )

    loader = loader or default_loader
    train_pairs = [loader(r, base_dir) for r in train_records]
    val_pairs = [loader(r, base_dir) for r in val_records]
    train_labels = [binary_label(r.category) for r in train_records]
    val_labels = [binary_label(r.category) for r in val_records]
    if cfg.mode == "supervised" and len(set(train_labels)) < 2:
        raise SingleClassError("supervised training needs both labels in the train set")

    feature_dims = (train_pairs[0].audio.shape[1], train_pairs[0].video.shape[1])
    net = create_network(
        head=cfg.head,
        feature_dims=feature_dims,
        hidden_dims=cfg.hidden_dims,
        normalize_inputs=cfg.normalize_inputs,
        seed=cfg.seed,
    )
    loss_cfg = cfg.loss_config()
    params = net.to_vector()
    adam = _Adam(params.size, net.dtype, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    rng = np.random.default_rng(cfg.seed)

    lr = cfg.resolved_learning_rate()
    report = TrainReport()
    best_params = params.copy()
    scheduler_bad = 0
    stop_bad = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train_pairs))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grad_sum = np.zeros_like(params)
            for idx in batch:
                loss, grads = _video_objective(
                    cfg, net, train_pairs[idx], train_labels[idx], loss_cfg
                )
                epoch_losses.append(loss)
                grad_sum += grads.to_vector()
            params = adam.step(params, grad_sum / len(batch), lr)
            net.from_vector(params)

        train_loss = float(np.mean(epoch_losses))
        val_loss = _validation_loss(cfg, net, val_pairs, val_labels, loss_cfg)
        report.train_losses.append(train_loss)
        report.val_losses.append(val_loss)
        report.learning_rates.append(lr)
        log.info(
            "epoch %d: train %.6f val %.6f lr %.3g", epoch, train_loss, val_loss, lr
        )

        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best_params = params.copy()
            scheduler_bad = 0
            stop_bad = 0
        else:
            scheduler_bad += 1
            stop_bad += 1
            if cfg.mode == "unsupervised" and scheduler_bad >= cfg.scheduler_patience:
                lr *= cfg.scheduler_factor
                scheduler_bad = 0
                log.info("plateau: learning rate reduced to %.3g", lr)
        if stop_bad >= cfg.early_stop_patience:
            log.info("early stop after %d epochs without improvement", stop_bad)
            break

    net.from_vector(best_params)
    if checkpoint_path is not None:
        alignment.save_checkpoint(
            net,
            checkpoint_path,
            metadata={
                "config": cfg.to_dict(),
                "best_epoch": report.best_epoch,
                "best_val_loss": report.best_val_loss,
            },
        )
        report.checkpoint_path = str(checkpoint_path)
    return net, report


def score_dataset(
    net: AlignmentNetwork,
    records,
    loss_cfg: LossConfig = LossConfig(),
    base_dir=None,
    per_frame: bool = False,
    trim_frames: int = 0,
    loader=None,
) -> ScoreReport:
    """Score every record; one video row each, optional per-frame rows.

    Records whose feature file is missing are logged and omitted rather
    than aborting the run. With trim_frames > 0 the first frames are
    dropped before scoring and per-frame rows keep original frame indices.
    """
    loader = loader or default_loader
    report = ScoreReport(entries=[], frames=[] if per_frame else None)
    for record in records:
        try:
            pair = loader(record, base_dir)
        except MissingFeatureFileError as exc:
            log.warning("skipping %s: %s", record.source_id, exc)
            continue
        full_frames = pair.n_frames
        if trim_frames > 0:
            pair = trim_features(pair, trim_frames)
        label = binary_label(record.category)
        report.entries.append(
            (record.source_id, alignment.video_score(net, pair, loss_cfg), label)
        )
        if per_frame:
            fakeness = alignment.per_frame_fakeness(net, pair, loss_cfg)
            labels = frame_labels(record, full_frames, pair.fps)[trim_frames:]
            for i, (f, fl) in enumerate(zip(fakeness, labels)):
                report.frames.append(
                    (record.source_id, i + trim_frames, float(f), int(fl))
                )
    return report
