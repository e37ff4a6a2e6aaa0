import io

import numpy as np
import pytest

from avalign import alignment
from avalign.alignment import (
    LAYER_NORM_EPS,
    AlignmentNetwork,
    LossConfig,
    create_network,
    frame_probability,
    load_checkpoint,
    per_frame_fakeness,
    pool_misalignment,
    save_checkpoint,
    score,
    supervised_frame_fakeness,
    supervised_logit,
    supervised_loss,
    supervised_loss_gradient,
    video_loss,
    video_loss_gradient,
    video_score,
    window_bounds,
    window_softmax,
)
from avalign.errors import DimensionMismatchError, MalformedHeaderError, TruncatedDataError
from avalign.feature_io import FeatureSequencePair


def make_pair(t, d=4, seed=0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    pair = FeatureSequencePair(
        audio=rng.normal(size=(t, d)).astype(np.float32),
        video=rng.normal(size=(t, d)).astype(np.float32),
    )
    if dtype is not np.float32:
        pair.audio = pair.audio.astype(dtype)
        pair.video = pair.video.astype(dtype)
    return pair


def zeroed(net):
    for w in net.weights:
        w[...] = 0
    for b in net.biases:
        b[...] = 0
    return net


def tiny_net(seed=0, dtype=np.float64, feature_dim=4, hidden=(4,)):
    return create_network(
        head="mlp", feature_dims=(feature_dim, feature_dim), hidden_dims=hidden,
        seed=seed, dtype=dtype,
    )


# ---------------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------------


class TestScore:
    def test_zero_network_scores_zero(self):
        net = zeroed(tiny_net())
        rng = np.random.default_rng(1)
        for _ in range(5):
            assert score(net, rng.normal(size=4), rng.normal(size=4)) == 0.0

    def test_power_of_two_rescaling_is_bit_exact(self):
        net = tiny_net(seed=3, dtype=np.float32)
        a = np.random.default_rng(4).normal(size=4).astype(np.float32)
        v = np.random.default_rng(5).normal(size=4).astype(np.float32)
        assert score(net, a, v) == score(net, 2.0 * a, v)
        assert score(net, a, v) == score(net, a, 0.25 * v)

    def test_arbitrary_positive_rescaling_within_tolerance(self):
        net = tiny_net(seed=6, dtype=np.float32)
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.normal(size=4).astype(np.float32)
            v = rng.normal(size=4).astype(np.float32)
            base = score(net, a, v)
            assert score(net, 7.3 * a, 0.011 * v) == pytest.approx(base, abs=1e-6)

    def test_hand_computed_forward_pass(self):
        # dims 4 -> 3 -> 1, fixed parameters, oracle computed with bare loops
        net = create_network(
            head="mlp", feature_dims=(2, 2), hidden_dims=(3,),
            normalize_inputs=False, dtype=np.float64,
        )
        net.norm_scales[0][...] = [1.0, 2.0, 1.0, 0.5]
        net.norm_shifts[0][...] = [0.1, 0.0, -0.1, 0.2]
        net.weights[0][...] = [[0.5, -1.0, 0.25, 0.0],
                               [1.0, 1.0, 1.0, 1.0],
                               [-0.5, 0.5, -0.5, 0.5]]
        net.biases[0][...] = [0.1, -0.2, 0.3]
        net.weights[1][...] = [[2.0, -1.0, 0.5]]
        net.biases[1][...] = [0.05]

        x = [0.3, -0.7, 1.1, 0.2]
        mean = sum(x) / 4.0
        var = sum((xi - mean) ** 2 for xi in x) / 4.0
        inv = 1.0 / (var + LAYER_NORM_EPS) ** 0.5
        u = [s * (xi - mean) * inv + t
             for xi, s, t in zip(x, net.norm_scales[0], net.norm_shifts[0])]
        h = []
        for row, b in zip(net.weights[0], net.biases[0]):
            z = sum(wi * ui for wi, ui in zip(row, u)) + b
            h.append(max(z, 0.0))
        expected = sum(wi * hi for wi, hi in zip(net.weights[1][0], h)) + net.biases[1][0]

        assert score(net, x[:2], x[2:]) == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch_rejected(self):
        net = tiny_net()
        with pytest.raises(DimensionMismatchError):
            score(net, np.zeros(3), np.zeros(4))


class TestFrameProbability:
    def test_uniform_interior_window(self):
        net = zeroed(tiny_net())
        pair = make_pair(t=64, seed=8)
        assert frame_probability(net, pair, 40) == pytest.approx(1 / 31, abs=0)

    def test_boundary_window_clamps_to_16(self):
        net = zeroed(tiny_net())
        pair = make_pair(t=64, seed=9)
        assert frame_probability(net, pair, 0) == pytest.approx(1 / 16, abs=0)

    def test_dominant_diagonal_closed_form(self):
        # craft logits: 10 on the diagonal of the center frame, 0 elsewhere
        t = 31
        net = create_network(
            head="linear", feature_dims=(2, 2), normalize_inputs=False, dtype=np.float64
        )
        net.weights[0][...] = [[0.0, 0.0, 1.0, 0.0]]
        net.biases[0][...] = 0.0
        video = np.zeros((t, 2), dtype=np.float32)
        video[15, 0] = 10.0
        pair = FeatureSequencePair(audio=np.zeros((t, 2), np.float32), video=video)
        expected = np.exp(10.0) / (np.exp(10.0) + 30.0)
        assert frame_probability(net, pair, 15) == pytest.approx(expected, rel=1e-12)

    def test_matches_per_pair_enumeration(self):
        net = tiny_net(seed=10, dtype=np.float64)
        pair = make_pair(t=12, seed=11, dtype=np.float64)
        cfg = LossConfig(neighborhood_half_width=3)
        for i in range(12):
            lo, hi = window_bounds(12, i, 3)
            logits = np.array(
                [score(net, pair.audio[i], pair.video[k]) for k in range(lo, hi + 1)]
            )
            shifted = np.exp(logits - logits.max())
            expected = shifted[i - lo] / shifted.sum()
            assert frame_probability(net, pair, i, cfg) == pytest.approx(expected, rel=1e-12)

    def test_window_softmax_sums_to_one(self):
        net = tiny_net(seed=12)
        pair = make_pair(t=20, seed=13)
        cfg = LossConfig(neighborhood_half_width=4)
        for i in (0, 3, 10, 19):
            ks, probs = window_softmax(net, pair, i, cfg)
            assert probs.sum() == pytest.approx(1.0, abs=1e-12)
            lo, hi = window_bounds(20, i, 4)
            assert (ks[0], ks[-1]) == (lo, hi)


class TestVideoLoss:
    def test_zero_network_gives_log_window_size(self):
        net = zeroed(tiny_net())
        pair = make_pair(t=100, seed=14)
        sizes = [
            min(99, i + 15) - max(0, i - 15) + 1 for i in range(100)
        ]
        expected = float(np.mean(np.log(sizes)))
        assert video_loss(net, pair) == pytest.approx(expected, abs=1e-6)

    def test_single_frame_loss_is_zero(self):
        net = tiny_net(seed=15)
        pair = make_pair(t=1, seed=16)
        assert video_loss(net, pair) == 0.0

    def test_matches_enumeration_oracle(self):
        net = tiny_net(seed=17, dtype=np.float64)
        pair = make_pair(t=9, seed=18, dtype=np.float64)
        cfg = LossConfig(neighborhood_half_width=2)
        total = 0.0
        for i in range(9):
            lo, hi = window_bounds(9, i, 2)
            logits = np.array(
                [score(net, pair.audio[i], pair.video[k]) for k in range(lo, hi + 1)],
                dtype=np.float64,
            )
            peak = logits.max()
            total += -(logits[i - lo] - (peak + np.log(np.sum(np.exp(logits - peak)))))
        assert video_loss(net, pair, cfg) == pytest.approx(total / 9, rel=1e-10)

    def test_loss_non_negative(self):
        rng = np.random.default_rng(19)
        for seed in range(10):
            net = tiny_net(seed=seed)
            pair = make_pair(t=int(rng.integers(1, 40)), seed=seed + 100)
            assert video_loss(net, pair, LossConfig(neighborhood_half_width=5)) >= 0.0

    def test_rescaling_invariance_of_loss(self):
        net = tiny_net(seed=20, dtype=np.float32)
        pair = make_pair(t=16, seed=21)
        cfg = LossConfig(neighborhood_half_width=3)
        base = video_loss(net, pair, cfg)
        scaled = FeatureSequencePair(
            audio=pair.audio * np.float32(3.7), video=pair.video * np.float32(0.02)
        )
        assert video_loss(net, scaled, cfg) == pytest.approx(base, abs=1e-6)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def finite_difference(loss_fn, net, step=1e-3):
    base = net.to_vector().astype(np.float64)
    grad = np.empty_like(base)
    probe = net.copy()
    for j in range(base.size):
        for sign, slot in ((1.0, 0), (-1.0, 1)):
            vec = base.copy()
            vec[j] += sign * step
            probe.from_vector(vec)
            if slot == 0:
                up = loss_fn(probe)
            else:
                down = loss_fn(probe)
        grad[j] = (up - down) / (2 * step)
    return grad


def relative_errors(analytic, numeric):
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return np.abs(analytic - numeric) / denom


def _safe_instance(seed):
    """Instance whose window-pair pre-activations avoid the rectifier kink."""
    for attempt in range(200):
        net = tiny_net(seed=seed * 37 + attempt, dtype=np.float64)
        pair = make_pair(t=8, seed=seed * 91 + attempt, dtype=np.float64)
        a, v = alignment._pair_inputs(net, pair)
        queries, candidates, _, _, _ = alignment._window_index(8, 2)
        x = np.concatenate([a[queries], v[candidates]], axis=1)
        _, cache = alignment._forward_batch(net, x, keep_cache=True)
        margin = min(
            float(np.min(np.abs(u @ net.weights[l].T + net.biases[l])))
            for l, (_, _, u, _) in enumerate(cache[0])
        )
        if margin > 5e-3:
            return net, pair
    raise AssertionError("could not build a kink-free instance")


class TestGradients:
    def test_contrastive_gradient_matches_finite_differences(self):
        cfg = LossConfig(neighborhood_half_width=2)
        for seed in range(10):
            net, pair = _safe_instance(seed)
            loss, grads = video_loss_gradient(net, pair, cfg)
            numeric = finite_difference(lambda n: video_loss(n, pair, cfg), net)
            assert loss == pytest.approx(video_loss(net, pair, cfg), rel=1e-12)
            assert relative_errors(grads.to_vector(), numeric).max() < 1e-4

    def test_supervised_gradient_matches_finite_differences(self):
        for seed in range(10):
            net, pair = _safe_instance(seed + 50)
            y = seed % 2
            loss, grads = supervised_loss_gradient(net, pair, y)
            numeric = finite_difference(lambda n: supervised_loss(n, pair, y), net)
            assert loss == pytest.approx(supervised_loss(net, pair, y), rel=1e-12)
            assert relative_errors(grads.to_vector(), numeric).max() < 1e-4

    def test_gradient_vanishes_at_convex_minimum(self):
        # linear head, one pair fed with both labels: optimum is logit == 0
        net = create_network(head="linear", feature_dims=(3, 3), seed=2, dtype=np.float64)
        pair = make_pair(t=4, d=3, seed=33, dtype=np.float64)
        vec = net.to_vector()
        for _ in range(3000):
            _, g0 = supervised_loss_gradient(net, pair, 0)
            _, g1 = supervised_loss_gradient(net, pair, 1)
            vec = vec - 0.5 * (g0.to_vector() + g1.to_vector())
            net.from_vector(vec)
        _, g0 = supervised_loss_gradient(net, pair, 0)
        _, g1 = supervised_loss_gradient(net, pair, 1)
        assert np.linalg.norm(g0.to_vector() + g1.to_vector()) < 1e-6

    def test_dead_rectifier_blocks_gradients_exactly(self):
        net = create_network(
            head="mlp", feature_dims=(3, 3), hidden_dims=(4, 3), seed=5, dtype=np.float64
        )
        net.biases[0][...] = -10.0  # layer 0 rectifier never fires
        net.biases[1][...] = 1.0  # keep layer 1 alive on its zero input
        pair = make_pair(t=6, d=3, seed=34, dtype=np.float64)
        _, grads = video_loss_gradient(net, pair, LossConfig(neighborhood_half_width=2))
        assert np.all(grads.weights[0] == 0.0)
        assert np.all(grads.biases[0] == 0.0)
        # the following affine sees layer-norm(0) = shift = 0, so its weight is dead too
        assert np.all(grads.weights[1] == 0.0)
        assert np.any(grads.biases[1] != 0.0)


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


class TestFakenessAndScore:
    def test_uniform_net_interior_fakeness(self):
        net = zeroed(tiny_net())
        pair = make_pair(t=64, seed=22)
        fakeness = per_frame_fakeness(net, pair)
        assert fakeness[31] == pytest.approx(30 / 31, abs=1e-12)

    def test_dominant_diagonal_fakeness_approaches_zero(self):
        t = 31
        net = create_network(
            head="linear", feature_dims=(2, 2), normalize_inputs=False, dtype=np.float64
        )
        net.weights[0][...] = [[0.0, 0.0, 1.0, 0.0]]
        video = np.zeros((t, 2), dtype=np.float32)
        video[15, 0] = 40.0
        pair = FeatureSequencePair(audio=np.zeros((t, 2), np.float32), video=video)
        assert per_frame_fakeness(net, pair)[15] < 1e-12

    def test_constant_pooling_agrees(self):
        assert pool_misalignment([3.3] * 7, "logsumexp") == pytest.approx(3.3)
        assert pool_misalignment([3.3] * 7, "mean") == pytest.approx(3.3)

    def test_spike_sensitivity_of_logsumexp(self):
        m = np.zeros(100)
        m[17] = 20.0
        assert pool_misalignment(m, "logsumexp") == pytest.approx(
            20.0 - np.log(100.0), abs=1e-6
        )
        assert pool_misalignment(m, "mean") == pytest.approx(0.2)

    def test_pooling_monotone_in_each_entry(self):
        rng = np.random.default_rng(23)
        m = rng.uniform(0, 3, 50)
        for pooling in ("logsumexp", "mean"):
            base = pool_misalignment(m, pooling)
            for idx in (0, 20, 49):
                bumped = m.copy()
                bumped[idx] += 0.5
                assert pool_misalignment(bumped, pooling) >= base

    def test_video_score_equals_pooled_misalignment(self):
        net = tiny_net(seed=24)
        pair = make_pair(t=30, seed=25)
        for pooling in ("logsumexp", "mean"):
            cfg = LossConfig(neighborhood_half_width=5, pooling=pooling)
            m = -alignment.frame_log_probabilities(net, pair, cfg)
            assert video_score(net, pair, cfg) == pytest.approx(
                pool_misalignment(m, pooling), rel=1e-12
            )

    def test_no_nan_for_moderate_logits(self):
        # crafted diagonal logits at +-50 stay finite through every op
        t = 11
        for sign in (+1.0, -1.0):
            net = create_network(
                head="linear", feature_dims=(2, 2), normalize_inputs=False, dtype=np.float64
            )
            net.weights[0][...] = [[0.0, 0.0, 1.0, 0.0]]
            video = np.full((t, 2), 0.0, dtype=np.float32)
            video[:, 0] = sign * 50.0
            pair = FeatureSequencePair(audio=np.zeros((t, 2), np.float32), video=video)
            cfg = LossConfig(neighborhood_half_width=3)
            values = [
                video_loss(net, pair, cfg),
                video_score(net, pair, cfg),
                supervised_logit(net, pair),
                supervised_loss(net, pair, 0),
                supervised_loss(net, pair, 1),
            ]
            assert np.all(np.isfinite(values))
            assert np.all(np.isfinite(per_frame_fakeness(net, pair, cfg)))


class TestSupervised:
    def test_single_zero_logit(self):
        net = zeroed(tiny_net())
        pair = make_pair(t=1, seed=26)
        assert supervised_logit(net, pair) == 0.0
        assert supervised_loss(net, pair, 0) == pytest.approx(np.log(2))
        assert supervised_loss(net, pair, 1) == pytest.approx(np.log(2))

    def test_logsumexp_of_zeros(self):
        net = zeroed(tiny_net())
        pair = make_pair(t=8, seed=27)
        assert supervised_logit(net, pair) == pytest.approx(np.log(8), rel=1e-12)

    def test_frame_fakeness_is_sigmoid_of_diagonal(self):
        net = zeroed(tiny_net())
        pair = make_pair(t=5, seed=28)
        assert supervised_frame_fakeness(net, pair).tolist() == [0.5] * 5

    def test_empty_pair_raises_typed_error(self):
        from avalign.errors import EmptyInputError

        net = tiny_net()
        pair = FeatureSequencePair(
            audio=np.zeros((0, 4), np.float32), video=np.zeros((0, 4), np.float32)
        )
        with pytest.raises(EmptyInputError):
            video_loss(net, pair)
        with pytest.raises(EmptyInputError):
            supervised_logit(net, pair)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = create_network(feature_dims=(6, 6), hidden_dims=(8, 4), seed=41)
        path = tmp_path / "net.avhc"
        save_checkpoint(net, path, metadata={"note": "fixture", "epoch": 3})
        back, metadata = load_checkpoint(path)
        assert metadata == {"note": "fixture", "epoch": 3}
        assert back.head == net.head
        assert back.normalize_inputs == net.normalize_inputs
        assert np.array_equal(back.to_vector(), net.to_vector())

    def test_linear_head_round_trip(self, tmp_path):
        net = create_network(head="linear", feature_dims=(5, 5), seed=42)
        path = tmp_path / "lin.avhc"
        save_checkpoint(net, path)
        back, _ = load_checkpoint(path)
        assert back.head == "linear"
        assert np.array_equal(back.to_vector(), net.to_vector())

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.avhc"
        path.write_bytes(b"NOPE\n{}\n")
        with pytest.raises(MalformedHeaderError):
            load_checkpoint(path)

    def test_truncated_blob(self, tmp_path):
        net = create_network(feature_dims=(4, 4), hidden_dims=(3,), seed=43)
        path = tmp_path / "trunc.avhc"
        save_checkpoint(net, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(TruncatedDataError):
            load_checkpoint(path)
