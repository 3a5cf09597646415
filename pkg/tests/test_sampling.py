import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangegen.errors import ConfigurationError
from rangegen.sampling import (
    LabelNormalizer,
    NearestLabelIndex,
    sample_condition,
    uniform_label_batch,
)


class TestLabelNormalizer:
    def test_endpoints(self):
        norm = LabelNormalizer((2.0,), (6.0,))
        assert norm.normalize(np.array([2.0]))[0] == 0.0
        assert norm.normalize(np.array([6.0]))[0] == 1.0

    def test_midpoint(self):
        norm = LabelNormalizer((2.0,), (6.0,))
        assert norm.normalize(np.array([4.0]))[0] == 0.5

    def test_out_of_sample_values_not_clipped(self):
        norm = LabelNormalizer((0.0,), (1.0,))
        assert norm.normalize(np.array([1.5]))[0] == 1.5
        assert norm.normalize(np.array([-0.25]))[0] == -0.25

    @given(st.floats(-100, 100), st.floats(0.1, 50), st.floats(-3, 3))
    @settings(max_examples=100, deadline=None)
    def test_round_trip(self, lo, width, t):
        norm = LabelNormalizer((lo,), (lo + width,))
        raw = lo + t * width
        back = norm.denormalize(norm.normalize(np.array([raw])))[0]
        assert abs(back - raw) < 1e-9 * max(1.0, abs(raw))

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(ConfigurationError):
            LabelNormalizer((1.0,), (1.0,))

    def test_fit_matches_observed_extremes(self):
        rng = np.random.default_rng(0)
        raw = rng.normal(3.0, 2.0, size=(50, 2))
        norm = LabelNormalizer.fit(raw)
        scaled = norm.normalize(raw)
        assert scaled.min() == 0.0 and scaled.max() == 1.0


class TestSampleCondition:
    def test_bounds_hold_over_many_draws(self):
        rng = np.random.default_rng(1)
        lbs, ubs = [], []
        for _ in range(100_000):
            cond = sample_condition(rng, 1)
            lbs.append(cond.lb[0])
            ubs.append(cond.ub[0])
        lbs, ubs = np.asarray(lbs), np.asarray(ubs)
        assert lbs.min() >= 0.0 and lbs.max() <= 0.95
        assert np.all(ubs >= lbs + 0.05) and ubs.max() <= 1.0

    def test_min_width_forced(self):
        rng = np.random.default_rng(2)
        widths = []
        for _ in range(10_000):
            cond = sample_condition(rng, 1)
            widths.append(cond.ub[0] - cond.lb[0])
        assert min(widths) >= 0.05

    def test_lb_mean_matches_uniform(self):
        rng = np.random.default_rng(3)
        lbs = np.array([sample_condition(rng, 1).lb[0] for _ in range(100_000)])
        assert abs(lbs.mean() - 0.475) < 0.01

    def test_multi_label_draws_per_label(self):
        rng = np.random.default_rng(4)
        cond = sample_condition(rng, 2)
        assert cond.n_labels == 2
        for lo, hi in zip(cond.lb, cond.ub):
            assert hi - lo >= 0.05


class TestNearestLabelIndex:
    def test_simple_nearest(self):
        idx = NearestLabelIndex(np.array([0.0, 1.0]))
        assert idx.query(np.array([0.4]))[0] == 0
        assert idx.query(np.array([0.6]))[0] == 1

    def test_exact_tie_takes_lower_dataset_index(self):
        # 0.25/0.75 vs 0.5 is an exact tie in binary floating point
        idx = NearestLabelIndex(np.array([0.25, 0.75]))
        assert idx.query(np.array([0.5]))[0] == 0
        idx2 = NearestLabelIndex(np.array([0.75, 0.25]))
        assert idx2.query(np.array([0.5]))[0] == 0

    def test_duplicate_values_take_lowest_index(self):
        idx = NearestLabelIndex(np.array([0.5, 0.3, 0.5, 0.5]))
        assert idx.query(np.array([0.49]))[0] == 0

    def test_queries_outside_hull(self):
        idx = NearestLabelIndex(np.array([0.2, 0.8]))
        assert idx.query(np.array([-5.0]))[0] == 0
        assert idx.query(np.array([5.0]))[0] == 1

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(5)
        values = rng.uniform(size=200)
        idx = NearestLabelIndex(values)
        queries = rng.uniform(-0.1, 1.1, size=500)
        got = idx.query(queries)
        for u, g in zip(queries, got):
            dist = np.abs(values - u)
            best = dist.min()
            candidates = np.flatnonzero(dist == best)
            assert g == candidates.min()


class TestUniformLabelBatch:
    def test_samples_exist_in_dataset(self):
        rng = np.random.default_rng(6)
        labels = rng.uniform(size=100)
        rows = uniform_label_batch(labels, 64, rng)
        assert rows.shape == (64,)
        assert np.all((rows >= 0) & (rows < 100))

    def test_flattens_dense_center(self):
        rng = np.random.default_rng(7)
        raw = rng.normal(0.5, 0.15, size=5000)
        labels = (raw - raw.min()) / (raw.max() - raw.min())
        rows = uniform_label_batch(labels, 10_000, rng)
        picked = labels[rows]
        raw_counts, _ = np.histogram(labels, bins=10, range=(0, 1))
        picked_counts, _ = np.histogram(picked, bins=10, range=(0, 1))
        raw_ratio = raw_counts.max() / max(raw_counts.min(), 1)
        picked_ratio = picked_counts.max() / max(picked_counts.min(), 1)
        assert picked_ratio < raw_ratio / 3

    def test_reproducible_with_seed(self):
        labels = np.random.default_rng(8).uniform(size=300)
        a = uniform_label_batch(labels, 50, np.random.default_rng(9))
        b = uniform_label_batch(labels, 50, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)
