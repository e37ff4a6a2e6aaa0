"""Command-line entrypoint binding every module.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
error. Diagnostics go to stderr; machine-readable output goes to files or
stdout only. Every data output gets a ``<name>.meta.json`` sidecar with the
resolved configuration, and report paths render PNG figures next to their
CSVs unless ``--no-figures`` is given. Flag values override config-file
values, which override built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, alignment, metrics, plots, synth, trainer
from .audio_analysis import (
    AuditConfig,
    BiasFeatureVector,
    bias_features,
    trim_features,
    trim_leading,
)
from .audio_io import read_wav, write_wav
from .errors import ParseError, ToolkitError
from .feature_io import (
    REAL_CATEGORY,
    binary_label,
    read_features,
    read_manifest,
    write_features,
    write_manifest,
    DatasetManifest,
    ManifestRecord,
)
from .util import round_half_up

log = logging.getLogger("avalign")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


class _Resolver:
    """flags > config file > defaults."""

    def __init__(self, args):
        self.args = args
        self.file_values = {}
        if getattr(args, "config", None):
            try:
                with open(args.config, encoding="utf-8") as fh:
                    self.file_values = json.load(fh)
            except OSError as exc:
                raise ToolkitError(f"cannot open config file: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ParseError(f"config file is not valid JSON ({exc})") from exc
            if not isinstance(self.file_values, dict):
                raise ParseError("config file must hold a JSON object")

    def get(self, name, default):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.file_values:
            return self.file_values[name]
        return default

    def resolved(self, **pairs):
        return {name: self.get(name, default) for name, default in pairs.items()}


def _add_global_flags(parser):
    parser.add_argument("--threads", type=int, default=None, help="worker threads, 0 = auto")
    parser.add_argument(
        "--log-level",
        choices=["debug", "info", "warning", "error"],
        default=None,
    )
    parser.add_argument("--output-dir", default=None, help="base directory for relative outputs")
    parser.add_argument("--config", default=None, help="JSON config file with default values")


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    _add_global_flags(common)

    parser = _Parser(prog="avalign", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("audit", parents=[common], help="bias features per audio file, as CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--tau", type=float, default=None, help="silence threshold")
    p.add_argument("--delta", type=float, default=None, help="leading window seconds")

    p = sub.add_parser("trim", parents=[common], help="write a leading-trimmed dataset copy")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-root", required=True)
    p.add_argument("--trim-s", type=float, default=None, help="seconds to remove (default 0.040)")

    p = sub.add_parser("eval-auc", parents=[common], help="AUC of a scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--feature", default=None, help="score column name (default 'score')")
    p.add_argument("--per-frame", action="store_true", default=None)

    p = sub.add_parser("plot-data", parents=[common], help="histogram / sweep CSVs and figures")
    p.add_argument("kind", choices=["hist", "sweep"])
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--audit", default=None, help="audit CSV (hist)")
    p.add_argument("--feature", default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--manifest", default=None, help="manifest of WAVs (sweep)")
    p.add_argument("--grid", default=None, help="comma-separated parameter values")
    p.add_argument("--grid-start", type=float, default=None)
    p.add_argument("--grid-stop", type=float, default=None)
    p.add_argument("--grid-points", type=int, default=None)
    p.add_argument("--grid-scale", choices=["log", "linear"], default=None)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("gen-synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("kind", choices=["audio", "features"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-real", type=int, default=None)
    p.add_argument("--n-fake", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    # audio corpus
    p.add_argument("--duration-s", type=float, default=None)
    p.add_argument("--sample-rate", type=int, default=None)
    p.add_argument("--noise-floor", type=float, default=None)
    p.add_argument("--peak-amplitude", type=float, default=None)
    p.add_argument("--lead-lo", type=float, default=None, help="fake lead range low, seconds")
    p.add_argument("--lead-hi", type=float, default=None, help="fake lead range high, seconds")
    # feature corpus
    p.add_argument("--n-frames", type=int, default=None)
    p.add_argument("--feature-dim", type=int, default=None)
    p.add_argument("--latent-dim", type=int, default=None)
    p.add_argument("--noise-scale", type=float, default=None)
    p.add_argument("--smoothness", type=float, default=None)
    p.add_argument("--fake-mode", choices=list(synth.FAKE_MODES), default=None)
    p.add_argument("--shift-frames", type=int, default=None)
    p.add_argument("--segment-lo", type=int, default=None)
    p.add_argument("--segment-hi", type=int, default=None)
    p.add_argument("--first-frame-marker", action="store_true", default=None)
    p.add_argument("--train-fraction", type=float, default=None)
    p.add_argument("--val-fraction", type=float, default=None)
    p.add_argument("--fps", type=float, default=None)

    for name, help_text in [
        ("train-align", "fit the alignment scorer on real videos only"),
        ("train-sup", "fit the supervised variant on labeled videos"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--learning-rate", type=float, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--max-epochs", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--head", choices=list(alignment.HEADS), default=None)
        p.add_argument("--hidden-dims", default=None, help="comma-separated, e.g. 512,256,128")
        p.add_argument("--half-width", type=int, default=None)
        p.add_argument("--pooling", choices=list(alignment.POOLINGS), default=None)
        p.add_argument(
            "--normalize-inputs", action=argparse.BooleanOptionalAction, default=None
        )
        p.add_argument("--scheduler-patience", type=int, default=None)
        p.add_argument("--scheduler-factor", type=float, default=None)
        p.add_argument("--early-stop-patience", type=int, default=None)
        p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("score", parents=[common], help="score a manifest split with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=["train", "val", "test", "all"], default=None)
    p.add_argument("--out", required=True, help="video-level scores CSV")
    p.add_argument("--per-frame-out", default=None, help="optional frame-level scores CSV")
    p.add_argument("--trim-frames", type=int, default=None)
    p.add_argument("--half-width", type=int, default=None)
    p.add_argument("--pooling", choices=list(alignment.POOLINGS), default=None)

    p = sub.add_parser("validate", parents=[common], help="re-check manifest and feature files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--base-dir", default=None)
    p.add_argument(
        "--check-audio", action=argparse.BooleanOptionalAction, default=None,
        help="also verify referenced audio files decode",
    )
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _setup_logging(level_name):
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, (level_name or "info").upper()),
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _out_path(res, path):
    base = res.get("output_dir", None)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_meta(data_path, command, resolved):
    meta = {
        "tool": "avalign",
        "version": __version__,
        "command": command,
        "config": resolved,
    }
    with open(str(data_path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _n_workers(threads):
    if threads and threads > 0:
        return threads
    return os.cpu_count() or 1


def _manifest_base(manifest_path):
    return os.path.dirname(os.path.abspath(manifest_path))


def _resolve_record_path(base, path):
    return path if os.path.isabs(path) else os.path.join(base, path)


def _read_clip(base, record):
    if record.audio_path is None:
        raise ToolkitError(f"{record.source_id}: record has no audio_path")
    return read_wav(_resolve_record_path(base, record.audio_path), source_id=record.source_id)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_audit(args, res):
    cfg = AuditConfig(
        silence_threshold_tau=res.get("tau", AuditConfig().silence_threshold_tau),
        leading_window_delta_s=res.get("delta", AuditConfig().leading_window_delta_s),
    )
    manifest = read_manifest(args.manifest)
    base = _manifest_base(args.manifest)
    records = [r for r in manifest if r.audio_path is not None]
    if not records:
        raise ToolkitError("manifest has no records with audio_path")

    def one(record):
        clip = _read_clip(base, record)
        return record, bias_features(clip, cfg)

    with ThreadPoolExecutor(max_workers=_n_workers(res.get("threads", 0))) as pool:
        rows = list(pool.map(one, records))

    out = _out_path(res, args.out)
    _ensure_parent(out)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "label", *BiasFeatureVector.FIELDS])
        for record, feats in rows:
            writer.writerow(
                [
                    record.source_id,
                    binary_label(record.category),
                    f"{feats.leading_silence_s:.9g}",
                    f"{feats.leading_max_amplitude:.9g}",
                    f"{feats.trailing_silence_s:.9g}",
                    f"{feats.global_max_amplitude:.9g}",
                ]
            )
    _write_meta(out, "audit", {"manifest": args.manifest, **cfg.__dict__})
    log.info("audited %d records -> %s", len(rows), out)
    return EXIT_OK


def _cmd_trim(args, res):
    trim_s = res.get("trim_s", AuditConfig().trim_duration_s)
    manifest = read_manifest(args.manifest)
    base = _manifest_base(args.manifest)
    out_root = _out_path(res, args.out_root)

    trimmed_records = []
    for record in manifest:
        if record.audio_path is not None:
            clip = _read_clip(base, record)
            out_wav = os.path.join(out_root, record.audio_path)
            _ensure_parent(out_wav)
            write_wav(trim_leading(clip, trim_s), out_wav)
        if record.feature_path is not None:
            pair = read_features(
                _resolve_record_path(base, record.feature_path), record.source_id
            )
            n_frames = round_half_up(trim_s * pair.fps)
            out_feat = os.path.join(out_root, record.feature_path)
            _ensure_parent(out_feat)
            write_features(trim_features(pair, n_frames), out_feat)
        # annotations follow the trimmed clock
        segments = [
            (max(0.0, s - trim_s), e - trim_s)
            for s, e in record.fake_segments
            if e > trim_s
        ]
        trimmed_records.append(
            ManifestRecord(
                source_id=record.source_id,
                category=record.category,
                split=record.split,
                feature_path=record.feature_path,
                audio_path=record.audio_path,
                fake_segments=segments,
            )
        )

    manifest_out = os.path.join(out_root, "manifest.jsonl")
    _ensure_parent(manifest_out)
    write_manifest(DatasetManifest(records=trimmed_records), manifest_out)
    _write_meta(manifest_out, "trim", {"manifest": args.manifest, "trim_s": trim_s})
    log.info("trimmed %d records -> %s", len(trimmed_records), out_root)
    return EXIT_OK


def _cmd_eval_auc(args, res):
    per_frame = bool(res.get("per_frame", False))
    score_column = res.get("feature", None) or "score"
    label_column = "frame_label" if per_frame else "label"
    scores, labels = metrics.read_scores_csv(args.scores, score_column, label_column)
    value = metrics.auc(scores, labels)
    print(f"{value:.6f}")
    return EXIT_OK


def _read_audit_csv(path, feature):
    values = {0: [], 1: []}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or feature not in reader.fieldnames:
            raise ParseError(f"audit CSV lacks column {feature!r}")
        for line_number, row in enumerate(reader, start=2):
            try:
                values[int(row["label"])].append(float(row[feature]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad row ({exc})", line_number) from None
    return values


def _cmd_plot_data(args, res):
    out_prefix = _out_path(res, args.out_prefix)
    _ensure_parent(out_prefix + ".csv")
    figures = res.get("figures", True)

    if args.kind == "hist":
        feature = res.get("feature", "leading_silence_s")
        if args.audit is None:
            raise _UsageError("plot-data hist requires --audit")
        values = _read_audit_csv(args.audit, feature)
        if not values[0] or not values[1]:
            raise ToolkitError("audit CSV must contain both labels for a class histogram")
        lo = res.get("lo", 0.0)
        hi = res.get("hi", max(max(values[0]), max(values[1])) or 1.0)
        bins = res.get("bins", 50)
        hist_real = metrics.histogram(values[0], bins, (lo, hi))
        hist_fake = metrics.histogram(values[1], bins, (lo, hi))
        csv_path = out_prefix + ".csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_center", "real_fraction", "fake_fraction"])
            for (center, real_frac), (_, fake_frac) in zip(hist_real, hist_fake):
                writer.writerow([f"{center:.9g}", f"{real_frac:.9g}", f"{fake_frac:.9g}"])
        _write_meta(csv_path, "plot-data hist", {"feature": feature, "bins": bins, "lo": lo, "hi": hi})
        if figures:
            centers = [c for c, _ in hist_real]
            plots.save_histogram_figure(
                out_prefix + ".png",
                centers,
                {"real": [f for _, f in hist_real], "fake": [f for _, f in hist_fake]},
                xlabel=feature,
            )
        return EXIT_OK

    # sweep
    if args.manifest is None:
        raise _UsageError("plot-data sweep requires --manifest")
    feature = res.get("feature", "leading_silence")
    if feature not in metrics.SWEEP_FEATURES:
        raise _UsageError(f"sweep feature must be one of {metrics.SWEEP_FEATURES}")
    grid = _build_grid(res)
    manifest = read_manifest(args.manifest)
    base = _manifest_base(args.manifest)
    records = [r for r in manifest if r.audio_path is not None]
    with ThreadPoolExecutor(max_workers=_n_workers(res.get("threads", 0))) as pool:
        clips = list(pool.map(lambda r: _read_clip(base, r), records))
    labels = [binary_label(r.category) for r in records]
    results = metrics.sweep_auc(clips, labels, feature, grid, threads=res.get("threads", 0))
    csv_path = out_prefix + ".csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "auc"])
        for param, value in results:
            writer.writerow([f"{param:.9g}", f"{value:.9g}"])
    _write_meta(csv_path, "plot-data sweep", {"feature": feature, "grid": list(grid)})
    if figures:
        plots.save_sweep_figure(
            out_prefix + ".png",
            [p for p, _ in results],
            [a for _, a in results],
            xlabel="tau" if feature == "leading_silence" else "delta (s)",
            log_x=res.get("grid_scale", "log") == "log",
        )
    return EXIT_OK


def _build_grid(res):
    raw = res.get("grid", None)
    if raw:
        return [float(x) for x in str(raw).split(",") if x.strip()]
    start = res.get("grid_start", None)
    stop = res.get("grid_stop", None)
    points = res.get("grid_points", 13)
    scale = res.get("grid_scale", "log")
    if start is None or stop is None:
        raise _UsageError("sweep needs --grid or --grid-start/--grid-stop")
    if scale == "log":
        return np.geomspace(start, stop, points).tolist()
    return np.linspace(start, stop, points).tolist()


def _cmd_gen_synth(args, res):
    out = _out_path(res, args.out)
    os.makedirs(out, exist_ok=True)
    if args.kind == "audio":
        defaults = synth.SynthAudioConfig()
        cfg = synth.SynthAudioConfig(
            n_real=res.get("n_real", defaults.n_real),
            n_fake=res.get("n_fake", defaults.n_fake),
            fake_lead_silence_range_s=(
                res.get("lead_lo", defaults.fake_lead_silence_range_s[0]),
                res.get("lead_hi", defaults.fake_lead_silence_range_s[1]),
            ),
            real_noise_floor=res.get("noise_floor", defaults.real_noise_floor),
            peak_amplitude=res.get("peak_amplitude", defaults.peak_amplitude),
            duration_s=res.get("duration_s", defaults.duration_s),
            sample_rate=res.get("sample_rate", defaults.sample_rate),
            seed=res.get("seed", defaults.seed),
        )
        clips, manifest = synth.gen_audio_corpus(cfg)
        manifest_path = synth.write_audio_corpus(clips, manifest, out)
        _write_meta(manifest_path, "gen-synth audio", cfg.__dict__)
        log.info("wrote %d clips under %s", len(clips), out)
        return EXIT_OK

    defaults = synth.SynthFeatureConfig()
    cfg = synth.SynthFeatureConfig(
        n_real=res.get("n_real", defaults.n_real),
        n_fake=res.get("n_fake", defaults.n_fake),
        n_frames=res.get("n_frames", defaults.n_frames),
        feature_dim=res.get("feature_dim", defaults.feature_dim),
        latent_dim=res.get("latent_dim", defaults.latent_dim),
        noise_scale=res.get("noise_scale", defaults.noise_scale),
        smoothness=res.get("smoothness", defaults.smoothness),
        fake_mode=res.get("fake_mode", defaults.fake_mode),
        shift_frames=res.get("shift_frames", defaults.shift_frames),
        segment_len_range=(
            res.get("segment_lo", defaults.segment_len_range[0]),
            res.get("segment_hi", defaults.segment_len_range[1]),
        ),
        first_frame_marker=res.get("first_frame_marker", defaults.first_frame_marker),
        fps=res.get("fps", defaults.fps),
        train_fraction=res.get("train_fraction", defaults.train_fraction),
        val_fraction=res.get("val_fraction", defaults.val_fraction),
        seed=res.get("seed", defaults.seed),
    )
    manifest = synth.gen_feature_corpus(cfg, out)
    meta_cfg = dict(cfg.__dict__)
    meta_cfg["segment_len_range"] = list(cfg.segment_len_range)
    _write_meta(os.path.join(out, "manifest.jsonl"), "gen-synth features", meta_cfg)
    log.info("wrote %d feature files under %s", len(manifest), out)
    return EXIT_OK


def _parse_hidden_dims(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return tuple(int(v) for v in str(value).split(",") if v.strip())


def _cmd_train(args, res, mode):
    defaults = trainer.TrainConfig(mode=mode)
    hidden = _parse_hidden_dims(res.get("hidden_dims", None)) or defaults.hidden_dims
    cfg = trainer.TrainConfig(
        mode=mode,
        learning_rate=res.get("learning_rate", None),
        scheduler_patience=res.get("scheduler_patience", defaults.scheduler_patience),
        scheduler_factor=res.get("scheduler_factor", defaults.scheduler_factor),
        early_stop_patience=res.get("early_stop_patience", defaults.early_stop_patience),
        batch_size=res.get("batch_size", defaults.batch_size),
        max_epochs=res.get("max_epochs", defaults.max_epochs),
        seed=res.get("seed", defaults.seed),
        head=res.get("head", defaults.head),
        hidden_dims=hidden,
        normalize_inputs=res.get("normalize_inputs", defaults.normalize_inputs),
        neighborhood_half_width=res.get("half_width", defaults.neighborhood_half_width),
        pooling=res.get("pooling", defaults.pooling),
    )
    manifest = read_manifest(args.manifest)
    base = _manifest_base(args.manifest)
    train_records = manifest.by_split("train")
    val_records = manifest.by_split("val")
    if mode == "unsupervised":
        n_before = len(train_records) + len(val_records)
        train_records = [r for r in train_records if r.category == REAL_CATEGORY]
        val_records = [r for r in val_records if r.category == REAL_CATEGORY]
        excluded = n_before - len(train_records) - len(val_records)
        if excluded:
            log.info("excluded %d non-real records from real-only training", excluded)

    out_dir = _out_path(res, args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    checkpoint_path = os.path.join(out_dir, "checkpoint.avhc")
    net, report = trainer.train(
        cfg, train_records, val_records, base_dir=base, checkpoint_path=checkpoint_path
    )

    csv_path = os.path.join(out_dir, "train_report.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "learning_rate"])
        for epoch in range(report.n_epochs):
            writer.writerow(
                [
                    epoch + 1,
                    f"{report.train_losses[epoch]:.9g}",
                    f"{report.val_losses[epoch]:.9g}",
                    f"{report.learning_rates[epoch]:.9g}",
                ]
            )
    summary = {
        "best_epoch": report.best_epoch,
        "best_val_loss": report.best_val_loss,
        "n_epochs": report.n_epochs,
        "checkpoint": checkpoint_path,
        "config": cfg.to_dict(),
    }
    with open(os.path.join(out_dir, "train_report.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_meta(csv_path, f"train-{mode}", cfg.to_dict())
    _write_meta(checkpoint_path, f"train-{mode}", cfg.to_dict())
    if res.get("figures", True):
        plots.save_loss_figure(os.path.join(out_dir, "loss_curve.png"), report)
    log.info(
        "best epoch %d val loss %.6f -> %s", report.best_epoch, report.best_val_loss, out_dir
    )
    return EXIT_OK


def _cmd_score(args, res):
    net, metadata = alignment.load_checkpoint(args.checkpoint)
    trained = metadata.get("config", {}) if isinstance(metadata, dict) else {}
    loss_cfg = alignment.LossConfig(
        neighborhood_half_width=res.get(
            "half_width", trained.get("neighborhood_half_width", 15)
        ),
        pooling=res.get("pooling", trained.get("pooling", "logsumexp")),
    )
    manifest = read_manifest(args.manifest)
    base = _manifest_base(args.manifest)
    split = res.get("split", "test")
    records = list(manifest) if split == "all" else manifest.by_split(split)
    per_frame = args.per_frame_out is not None
    report = trainer.score_dataset(
        net,
        records,
        loss_cfg,
        base_dir=base,
        per_frame=per_frame,
        trim_frames=res.get("trim_frames", 0),
    )
    out = _out_path(res, args.out)
    _ensure_parent(out)
    metrics.write_scores_csv(report, out)
    resolved = {
        "checkpoint": args.checkpoint,
        "split": split,
        "trim_frames": res.get("trim_frames", 0),
        "half_width": loss_cfg.neighborhood_half_width,
        "pooling": loss_cfg.pooling,
    }
    _write_meta(out, "score", resolved)
    if per_frame:
        frame_out = _out_path(res, args.per_frame_out)
        _ensure_parent(frame_out)
        metrics.write_frame_scores_csv(report, frame_out)
        _write_meta(frame_out, "score --per-frame", resolved)
    log.info("scored %d records -> %s", len(report.entries), out)
    return EXIT_OK


def _cmd_validate(args, res):
    manifest = read_manifest(args.manifest)  # raises typed errors on bad records
    base = _manifest_base(args.manifest)
    failures = 0
    for record in manifest:
        if record.feature_path is not None:
            path = _resolve_record_path(base, record.feature_path)
            try:
                pair = read_features(path, record.source_id)
                if not (np.all(np.isfinite(pair.audio)) and np.all(np.isfinite(pair.video))):
                    raise ToolkitError("non-finite feature values")
                if pair.n_frames == 0:
                    raise ToolkitError("feature file holds zero frames")
            except ToolkitError as exc:
                log.error("%s: %s", record.source_id, exc)
                failures += 1
        if record.audio_path is not None and res.get("check_audio", False):
            try:
                _read_clip(base, record)
            except ToolkitError as exc:
                log.error("%s: %s", record.source_id, exc)
                failures += 1
    if failures:
        log.error("validation failed for %d of %d records", failures, len(manifest))
        return EXIT_DATA
    log.info("%d records validated", len(manifest))
    return EXIT_OK


_HANDLERS = {
    "audit": _cmd_audit,
    "trim": _cmd_trim,
    "eval-auc": _cmd_eval_auc,
    "plot-data": _cmd_plot_data,
    "gen-synth": _cmd_gen_synth,
    "score": _cmd_score,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"avalign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help exits 0
        return int(exc.code or 0)

    try:
        res = _Resolver(args)
        _setup_logging(res.get("log_level", "info"))
        if args.command == "train-align":
            return _cmd_train(args, res, "unsupervised")
        if args.command == "train-sup":
            return _cmd_train(args, res, "supervised")
        return _HANDLERS[args.command](args, res)
    except _UsageError as exc:
        print(f"avalign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ToolkitError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except Exception:  # internal error: full trace on stderr
        import traceback

        traceback.print_exc()
        return EXIT_INTERNAL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
