"""avalign: leading-silence bias auditing and audio-video alignment scoring."""

__version__ = "0.1.0"

from .audio_io import AudioClip, read_wav, write_wav
from .audio_analysis import (
    AuditConfig,
    BiasFeatureVector,
    bias_features,
    leading_max_amplitude,
    leading_silence_duration,
    trailing_silence_duration,
    trim_features,
    trim_leading,
)
from .feature_io import (
    DatasetManifest,
    FeatureSequencePair,
    ManifestRecord,
    binary_label,
    frame_labels,
    read_features,
    read_manifest,
    write_features,
    write_manifest,
)
from .metrics import ScoreReport, auc, auc_bruteforce, histogram, sweep_auc
from .alignment import (
    AlignmentNetwork,
    LossConfig,
    create_network,
    load_checkpoint,
    per_frame_fakeness,
    save_checkpoint,
    score,
    supervised_loss,
    video_loss,
    video_score,
)
from .trainer import TrainConfig, TrainReport, score_dataset, train

__all__ = [name for name in dir() if not name.startswith("_")]
