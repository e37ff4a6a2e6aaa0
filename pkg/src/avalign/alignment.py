"""Frame-level audio-video alignment scorer.

A small network maps the concatenation of one audio feature vector and one
video feature vector to a scalar alignment logit. Each input vector is
independently L2-normalized first (optional). The MLP head stacks hidden
layers of the form layer-norm -> affine -> rectifier, then a final affine
to one output; the linear head is a single affine.

Training signal: within a temporal window around each frame i, the logit of
the true pair (i, i) competes in a softmax against the logits of (i, k) for
the neighboring video frames k. The per-video loss is the mean negative log
probability of the true pair. The supervised variant pools the diagonal
logits with log-sum-exp and applies binary cross-entropy against the video
label. Gradients are computed analytically in whatever dtype the parameters
use; float64 parameters give a float64 graph for finite-difference checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    IoFailureError,
    MalformedHeaderError,
    NonFiniteValueError,
    ParseError,
    TruncatedDataError,
)
from .feature_io import FeatureSequencePair

LAYER_NORM_EPS = 1e-5
CHECKPOINT_MAGIC = b"AVHC1"
DEFAULT_HIDDEN_DIMS = (512, 256, 128)
POOLINGS = ("logsumexp", "mean")
HEADS = ("mlp", "linear")


@dataclass
class LossConfig:
    """Temporal window and score pooling settings.

    The window around frame i is {max(0, i-h) .. min(T-1, i+h)}: the center
    plus up to 2h neighbors, clamped (never wrapped) at the boundaries.
    """

    neighborhood_half_width: int = 15
    pooling: str = "logsumexp"

    def __post_init__(self):
        if self.neighborhood_half_width < 1:
            raise ValueError("neighborhood_half_width must be >= 1")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}")


def _iter_arrays(weights, biases, norm_scales, norm_shifts):
    # Canonical parameter order, also the checkpoint blob order:
    # per hidden layer scale, shift, weight, bias; then final weight, bias.
    for l in range(len(weights) - 1):
        yield norm_scales[l]
        yield norm_shifts[l]
        yield weights[l]
        yield biases[l]
    yield weights[-1]
    yield biases[-1]


@dataclass
class AlignmentNetwork:
    head: str
    weights: list  # (out, in) matrices
    biases: list
    norm_scales: list  # one per hidden layer, sized to that layer's input
    norm_shifts: list
    normalize_inputs: bool = True

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def hidden_dims(self) -> tuple:
        return tuple(w.shape[0] for w in self.weights[:-1])

    def parameters(self):
        return _iter_arrays(self.weights, self.biases, self.norm_scales, self.norm_shifts)

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def from_vector(self, vector: np.ndarray) -> None:
        offset = 0
        for p in self.parameters():
            chunk = vector[offset : offset + p.size]
            if chunk.size != p.size:
                raise ValueError("vector length does not match the parameter count")
            p[...] = chunk.reshape(p.shape)
            offset += p.size
        if offset != len(vector):
            raise ValueError("vector length does not match the parameter count")

    def copy(self) -> "AlignmentNetwork":
        return AlignmentNetwork(
            head=self.head,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            norm_scales=[s.copy() for s in self.norm_scales],
            norm_shifts=[s.copy() for s in self.norm_shifts],
            normalize_inputs=self.normalize_inputs,
        )


@dataclass
class NetGradients:
    weights: list
    biases: list
    norm_scales: list
    norm_shifts: list

    def parameters(self):
        return _iter_arrays(self.weights, self.biases, self.norm_scales, self.norm_shifts)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])


def create_network(
    head: str = "mlp",
    feature_dims: tuple = (1024, 1024),
    hidden_dims: tuple = DEFAULT_HIDDEN_DIMS,
    normalize_inputs: bool = True,
    seed: int = 0,
    dtype=np.float32,
) -> AlignmentNetwork:
    """Initialize a network: uniform fan-in weights, zero biases, identity norms."""
    if head not in HEADS:
        raise ValueError(f"head must be one of {HEADS}")
    d_in = int(feature_dims[0]) + int(feature_dims[1])
    dims = [d_in, 1] if head == "linear" else [d_in, *map(int, hidden_dims), 1]
    rng = np.random.default_rng(seed)
    weights, biases, scales, shifts = [], [], [], []
    for l in range(len(dims) - 1):
        bound = 1.0 / np.sqrt(dims[l])
        weights.append(rng.uniform(-bound, bound, size=(dims[l + 1], dims[l])).astype(dtype))
        biases.append(np.zeros(dims[l + 1], dtype=dtype))
        if l < len(dims) - 2:
            scales.append(np.ones(dims[l], dtype=dtype))
            shifts.append(np.zeros(dims[l], dtype=dtype))
    return AlignmentNetwork(head, weights, biases, scales, shifts, normalize_inputs)


def zero_gradients(net: AlignmentNetwork) -> NetGradients:
    return NetGradients(
        weights=[np.zeros_like(w) for w in net.weights],
        biases=[np.zeros_like(b) for b in net.biases],
        norm_scales=[np.zeros_like(s) for s in net.norm_scales],
        norm_shifts=[np.zeros_like(s) for s in net.norm_shifts],
    )


# ---------------------------------------------------------------------------
# Forward / backward over a batch of concatenated pairs
# ---------------------------------------------------------------------------


def _layer_norm_forward(x, scale, shift):
    mu = x.mean(axis=1, keepdims=True)
    centered = x - mu
    var = np.mean(centered * centered, axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    x_hat = centered * inv_std
    return scale * x_hat + shift, x_hat, inv_std


def _forward_batch(net: AlignmentNetwork, x, keep_cache: bool = False):
    """Logits for a batch of input rows; optionally keeps the backward cache."""
    if x.shape[1] != net.input_dim:
        raise DimensionMismatchError(
            f"input width {x.shape[1]}, network expects {net.input_dim}"
        )
    hidden_cache = [] if keep_cache else None
    h = x
    for l in range(len(net.weights) - 1):
        u, x_hat, inv_std = _layer_norm_forward(h, net.norm_scales[l], net.norm_shifts[l])
        z = u @ net.weights[l].T + net.biases[l]
        a = np.maximum(z, 0.0)
        if keep_cache:
            hidden_cache.append((x_hat, inv_std, u, z > 0.0))
        h = a
    logits = h @ net.weights[-1].T + net.biases[-1]
    return logits[:, 0], (hidden_cache, h if keep_cache else None)


def _backward_batch(net: AlignmentNetwork, cache, d_logits) -> NetGradients:
    """Parameter gradients given d(loss)/d(logits). Inputs are constants."""
    hidden_cache, final_in = cache
    grads = zero_gradients(net)
    dz = d_logits[:, None].astype(net.dtype, copy=False)
    grads.weights[-1][...] = dz.T @ final_in
    grads.biases[-1][...] = dz.sum(axis=0)
    dh = dz @ net.weights[-1]
    for l in reversed(range(len(net.weights) - 1)):
        x_hat, inv_std, u, active = hidden_cache[l]
        dz = dh * active
        grads.weights[l][...] = dz.T @ u
        grads.biases[l][...] = dz.sum(axis=0)
        du = dz @ net.weights[l]
        grads.norm_scales[l][...] = (du * x_hat).sum(axis=0)
        grads.norm_shifts[l][...] = du.sum(axis=0)
        d_hat = du * net.norm_scales[l]
        m1 = d_hat.mean(axis=1, keepdims=True)
        m2 = (d_hat * x_hat).mean(axis=1, keepdims=True)
        dh = inv_std * (d_hat - m1 - x_hat * m2)
    return grads


def _l2_normalize_rows(m):
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)  # zero rows pass through unscaled
    return m / safe


def _pair_inputs(net: AlignmentNetwork, pair: FeatureSequencePair):
    a = np.asarray(pair.audio, dtype=net.dtype)
    v = np.asarray(pair.video, dtype=net.dtype)
    if a.shape[1] + v.shape[1] != net.input_dim:
        raise DimensionMismatchError(
            f"feature widths {a.shape[1]}+{v.shape[1]} do not match input {net.input_dim}"
        )
    if net.normalize_inputs:
        a = _l2_normalize_rows(a)
        v = _l2_normalize_rows(v)
    return a, v


@lru_cache(maxsize=64)
def _window_index(n_frames: int, half_width: int):
    idx = np.arange(n_frames)
    lo = np.maximum(0, idx - half_width)
    hi = np.minimum(n_frames - 1, idx + half_width)
    counts = hi - lo + 1
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    candidates = np.concatenate([np.arange(l, h + 1) for l, h in zip(lo, hi)])
    queries = np.repeat(idx, counts)
    diagonal = starts + (idx - lo)
    return queries, candidates, starts, counts, diagonal


def window_bounds(n_frames: int, i: int, half_width: int) -> tuple:
    """Inclusive candidate range for frame i."""
    return max(0, i - half_width), min(n_frames - 1, i + half_width)


def _segment_log_softmax(logits64, starts, counts, diagonal):
    """Per-window log-softmax of the diagonal logit, max-stabilized."""
    seg_max = np.maximum.reduceat(logits64, starts)
    seg_of = np.repeat(np.arange(len(starts)), counts)
    shifted = np.exp(logits64 - seg_max[seg_of])
    seg_sum = np.add.reduceat(shifted, starts)
    log_z = seg_max + np.log(seg_sum)
    log_p = logits64[diagonal] - log_z
    return log_p, shifted, seg_sum, seg_of


def _window_forward(net, pair, cfg, keep_cache=False):
    a, v = _pair_inputs(net, pair)
    n = a.shape[0]
    if n < 1:
        raise EmptyInputError(f"pair {pair.source_id!r} has no frames")
    queries, candidates, starts, counts, diagonal = _window_index(
        n, cfg.neighborhood_half_width
    )
    x = np.concatenate([a[queries], v[candidates]], axis=1)
    logits, cache = _forward_batch(net, x, keep_cache=keep_cache)
    return logits, cache, (starts, counts, diagonal), n


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def score(net: AlignmentNetwork, audio_vec, video_vec) -> float:
    """Alignment logit for one audio/video feature vector pair."""
    a = np.asarray(audio_vec, dtype=net.dtype).reshape(1, -1)
    v = np.asarray(video_vec, dtype=net.dtype).reshape(1, -1)
    if a.shape[1] + v.shape[1] != net.input_dim:
        raise DimensionMismatchError(
            f"feature widths {a.shape[1]}+{v.shape[1]} do not match input {net.input_dim}"
        )
    if net.normalize_inputs:
        a = _l2_normalize_rows(a)
        v = _l2_normalize_rows(v)
    logits, _ = _forward_batch(net, np.concatenate([a, v], axis=1))
    return float(logits[0])


def frame_log_probabilities(net, pair, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """log p(true video frame | audio frame) for every frame, length T."""
    logits, _, (starts, counts, diagonal), _ = _window_forward(net, pair, cfg)
    log_p, _, _, _ = _segment_log_softmax(
        logits.astype(np.float64, copy=False), starts, counts, diagonal
    )
    return log_p


def frame_probability(net, pair, i: int, cfg: LossConfig = LossConfig()) -> float:
    """Softmax probability of the true pair at frame i within its window."""
    n = pair.n_frames
    if not 0 <= i < n:
        raise ValueError(f"frame index {i} outside [0, {n})")
    _, probs = window_softmax(net, pair, i, cfg)
    lo, _ = window_bounds(n, i, cfg.neighborhood_half_width)
    return float(probs[i - lo])


def window_softmax(net, pair, i: int, cfg: LossConfig = LossConfig()):
    """Candidate frame indices and their softmax weights for frame i."""
    a, v = _pair_inputs(net, pair)
    n = a.shape[0]
    if not 0 <= i < n:
        raise ValueError(f"frame index {i} outside [0, {n})")
    lo, hi = window_bounds(n, i, cfg.neighborhood_half_width)
    ks = np.arange(lo, hi + 1)
    x = np.concatenate([np.repeat(a[i : i + 1], len(ks), axis=0), v[ks]], axis=1)
    logits, _ = _forward_batch(net, x)
    logits64 = logits.astype(np.float64)
    shifted = np.exp(logits64 - logits64.max())
    return ks, shifted / shifted.sum()


def video_loss(net, pair, cfg: LossConfig = LossConfig()) -> float:
    """Mean negative log probability of the true pair over all frames."""
    return float(-np.mean(frame_log_probabilities(net, pair, cfg)))


def video_loss_gradient(net, pair, cfg: LossConfig = LossConfig()):
    """(loss, analytic parameter gradients) for the windowed contrastive loss."""
    logits, cache, (starts, counts, diagonal), n = _window_forward(
        net, pair, cfg, keep_cache=True
    )
    log_p, shifted, seg_sum, seg_of = _segment_log_softmax(
        logits.astype(np.float64, copy=False), starts, counts, diagonal
    )
    loss = float(-np.mean(log_p))
    d_logits = shifted / seg_sum[seg_of] / n
    d_logits[diagonal] -= 1.0 / n
    grads = _backward_batch(net, cache, d_logits)
    return loss, grads


def per_frame_fakeness(net, pair, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """1 - p(true pair) per frame: higher means the frame looks misaligned."""
    return 1.0 - np.exp(frame_log_probabilities(net, pair, cfg))


def pool_misalignment(per_frame_scores, pooling: str) -> float:
    """Aggregate per-frame misalignment into one score.

    "logsumexp" is a smooth maximum, normalized by log T so videos of
    different lengths stay rank-comparable; "mean" averages. Both are
    monotone in every input.
    """
    m = np.asarray(per_frame_scores, dtype=np.float64)
    if m.size == 0:
        raise ValueError("nothing to pool")
    if pooling == "mean":
        return float(np.mean(m))
    if pooling != "logsumexp":
        raise ValueError(f"pooling must be one of {POOLINGS}")
    peak = float(np.max(m))
    return peak + float(np.log(np.sum(np.exp(m - peak)))) - float(np.log(m.size))


def video_score(net, pair, cfg: LossConfig = LossConfig()) -> float:
    """Pool per-frame misalignment -log p into one video-level fakeness score."""
    return pool_misalignment(-frame_log_probabilities(net, pair, cfg), cfg.pooling)


def _diagonal_logits(net, pair):
    a, v = _pair_inputs(net, pair)
    if a.shape[0] < 1:
        raise EmptyInputError(f"pair {pair.source_id!r} has no frames")
    logits, cache = _forward_batch(net, np.concatenate([a, v], axis=1), keep_cache=True)
    return logits, cache


def supervised_logit(net, pair) -> float:
    """log-sum-exp of the diagonal alignment logits."""
    logits, _ = _diagonal_logits(net, pair)
    logits64 = logits.astype(np.float64)
    peak = logits64.max()
    return float(peak + np.log(np.sum(np.exp(logits64 - peak))))


def _bce_with_logit(logit: float, y: int) -> float:
    # max(l,0) - l*y + log(1 + exp(-|l|)): the numerically fused form
    return max(logit, 0.0) - logit * y + float(np.log1p(np.exp(-abs(logit))))


def supervised_loss(net, pair, y: int) -> float:
    """Binary cross-entropy of sigmoid(pooled logit) against label y."""
    if y not in (0, 1):
        raise ValueError("label must be 0 or 1")
    return _bce_with_logit(supervised_logit(net, pair), y)


def supervised_loss_gradient(net, pair, y: int):
    """(loss, analytic parameter gradients) for the supervised objective."""
    if y not in (0, 1):
        raise ValueError("label must be 0 or 1")
    logits, cache = _diagonal_logits(net, pair)
    logits64 = logits.astype(np.float64)
    peak = logits64.max()
    shifted = np.exp(logits64 - peak)
    pooled = float(peak + np.log(shifted.sum()))
    loss = _bce_with_logit(pooled, y)
    d_pooled = _sigmoid_scalar(pooled) - y
    d_logits = d_pooled * shifted / shifted.sum()
    grads = _backward_batch(net, cache, d_logits)
    return loss, grads


def supervised_frame_fakeness(net, pair) -> np.ndarray:
    """sigmoid of each diagonal logit: the supervised per-frame fakeness trace."""
    logits, _ = _diagonal_logits(net, pair)
    return _sigmoid(logits.astype(np.float64))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _sigmoid_scalar(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + float(np.exp(-x)))
    ex = float(np.exp(x))
    return ex / (1.0 + ex)


# ---------------------------------------------------------------------------
# Checkpoints: text header line + little-endian f32 parameter blob
# ---------------------------------------------------------------------------


def save_checkpoint(net: AlignmentNetwork, path, metadata: dict | None = None) -> None:
    header = {
        "head": net.head,
        "input_dim": net.input_dim,
        "hidden_dims": list(net.hidden_dims),
        "normalize_inputs": net.normalize_inputs,
        "metadata": metadata or {},
    }
    if not all(np.all(np.isfinite(p)) for p in net.parameters()):
        raise NonFiniteValueError("network parameters contain NaN or Inf")
    blob = b"".join(p.astype("<f4").tobytes() for p in net.parameters())
    try:
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC + b"\n")
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
            fh.write(blob)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def load_checkpoint(path):
    """Returns (network, metadata dict). Parameters load as float32."""
    try:
        with open(path, "rb") as fh:
            magic = fh.readline().rstrip(b"\n")
            if magic != CHECKPOINT_MAGIC:
                raise MalformedHeaderError(f"bad checkpoint magic {magic!r}")
            header_line = fh.readline()
            if not header_line.endswith(b"\n"):
                raise TruncatedDataError("checkpoint header line is incomplete")
            try:
                header = json.loads(header_line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ParseError(f"checkpoint header is not valid JSON ({exc})") from exc
            blob = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot open {path}: {exc}") from exc

    try:
        head = header["head"]
        input_dim = int(header["input_dim"])
        hidden_dims = tuple(int(d) for d in header["hidden_dims"])
        normalize_inputs = bool(header["normalize_inputs"])
        metadata = header.get("metadata", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"checkpoint header missing fields ({exc})") from exc
    if head not in HEADS:
        raise ParseError(f"checkpoint head {head!r} unknown")

    # feature_dims only matters through its sum here; split evenly
    net = create_network(
        head=head,
        feature_dims=(input_dim - input_dim // 2, input_dim // 2),
        hidden_dims=hidden_dims or DEFAULT_HIDDEN_DIMS,
        normalize_inputs=normalize_inputs,
        seed=0,
    )
    expected = net.n_parameters() * 4
    if len(blob) < expected:
        raise TruncatedDataError(f"parameter blob holds {len(blob)} bytes, need {expected}")
    if len(blob) > expected:
        raise MalformedHeaderError(f"{len(blob) - expected} trailing bytes in checkpoint")
    net.from_vector(np.frombuffer(blob, dtype="<f4").astype(np.float32))
    return net, metadata
