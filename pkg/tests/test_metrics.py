import numpy as np
import pytest

from avalign.audio_io import AudioClip
from avalign.errors import EmptyInputError, SingleClassError
from avalign.metrics import auc, auc_bruteforce, histogram, sweep_auc


class TestAuc:
    def test_perfect_separation(self):
        assert auc([1.0, 1.0, 0.0, 0.0], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert auc([0.3] * 6, [1, 1, 1, 0, 0, 0]) == 0.5

    def test_hand_counted_example(self):
        # fake=[0.9, 0.4], real=[0.5, 0.1]: 3 wins of 4 pairs
        assert auc([0.9, 0.4, 0.5, 0.1], [1, 1, 0, 0]) == 0.75

    def test_single_pair(self):
        assert auc([0.7, 0.2], [1, 0]) == 1.0
        assert auc_bruteforce([0.7, 0.2], [1, 0]) == 1.0

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassError):
            auc([0.1, 0.2], [1, 1])
        with pytest.raises(SingleClassError):
            auc_bruteforce([0.1, 0.2], [0, 0])

    def test_matches_bruteforce_with_heavy_ties(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            n = int(rng.integers(4, 60))
            # draw from a small grid so ties are frequent
            scores = rng.choice(np.linspace(0, 1, 7), size=n)
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            assert auc(scores, labels) == pytest.approx(
                auc_bruteforce(scores, labels), abs=1e-9
            )

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(22)
        scores = rng.normal(size=80)
        labels = rng.integers(0, 2, size=80)
        labels[:2] = [0, 1]
        baseline = auc(scores, labels)
        assert auc(np.exp(scores), labels) == pytest.approx(baseline, abs=1e-12)
        assert auc(3 * scores + 11, labels) == pytest.approx(baseline, abs=1e-12)

    def test_label_swap_complements(self):
        rng = np.random.default_rng(23)
        scores = rng.choice([0.0, 0.25, 0.5, 1.0], size=50)
        labels = rng.integers(0, 2, size=50)
        labels[:2] = [0, 1]
        assert auc(scores, labels) + auc(scores, 1 - labels) == pytest.approx(1.0)


class TestHistogram:
    def test_symmetric_split(self):
        assert histogram([0, 0, 1, 1], 2, (0, 1)) == [(0.25, 0.5), (0.75, 0.5)]

    def test_single_value(self):
        bins = histogram([0.4], 4, (0, 1))
        assert sum(frac for _, frac in bins) == 1.0
        assert bins[1] == (0.375, 1.0)

    def test_out_of_range_clipped_to_edges(self):
        bins = histogram([-5.0, 7.0], 2, (0, 1))
        assert bins[0][1] == 0.5 and bins[1][1] == 0.5

    def test_fractions_sum_to_one(self):
        rng = np.random.default_rng(24)
        bins = histogram(rng.normal(size=1000), 17, (-3, 3))
        assert sum(frac for _, frac in bins) == pytest.approx(1.0)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            histogram([], 3, (0, 1))


class TestSweep:
    def _tiny_corpus(self):
        rate = 16000
        clips, labels = [], []
        rng = np.random.default_rng(25)
        for i in range(12):
            samples = rng.uniform(0.01, 0.05, 800).astype(np.float32)
            fake = i % 2 == 1
            if fake:
                samples[:400] = 0.0
            clips.append(AudioClip(samples, rate, f"c{i}"))
            labels.append(int(fake))
        return clips, labels

    def test_silence_sweep_separates_below_floor(self):
        clips, labels = self._tiny_corpus()
        results = sweep_auc(clips, labels, "leading_silence", [1e-4, 1e-3, 5e-3])
        assert [p for p, _ in results] == [1e-4, 1e-3, 5e-3]
        assert results[0][1] == 1.0

    def test_degenerate_grid(self):
        clips, labels = self._tiny_corpus()
        results = sweep_auc(clips, labels, "leading_max_amp", [0.01])
        assert len(results) == 1

    def test_threaded_matches_serial(self):
        clips, labels = self._tiny_corpus()
        grid = [1e-4, 1e-3, 1e-2]
        serial = sweep_auc(clips, labels, "leading_silence", grid, threads=1)
        threaded = sweep_auc(clips, labels, "leading_silence", grid, threads=3)
        assert serial == threaded
