import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathsig.class_stats import BernoulliClassModel
from pathsig.sparsity import build_histogram, path_frequencies, tail_mass


def model_with_counts(counts, sample_count):
    counts = np.asarray(counts, dtype=np.int64)
    model = BernoulliClassModel(counts.shape, 0)
    model.counts = counts
    model.sample_count = sample_count
    return model


class TestPathFrequencies:
    def test_direct_ratio(self):
        model = model_with_counts([[2, 1], [0, 0]], 2)
        assert np.array_equal(path_frequencies(model), [1.0, 0.5, 0.0, 0.0])

    def test_saturated_counts(self):
        model = model_with_counts(np.full((2, 3), 5), 5)
        assert np.array_equal(path_frequencies(model), np.ones(6))

    def test_zero_counts(self):
        model = model_with_counts(np.zeros((2, 3), dtype=int), 4)
        assert np.array_equal(path_frequencies(model), np.zeros(6))

    def test_no_samples_error(self):
        with pytest.raises(ValueError, match="no samples"):
            path_frequencies(BernoulliClassModel((2, 2), 0))


class TestBuildHistogram:
    def test_edge_rule(self):
        hist = build_histogram([0.0, 0.5, 1.0], bins=2)
        assert np.array_equal(hist.counts, [1, 2])
        assert np.array_equal(hist.bin_edges, [0.0, 0.5, 1.0])

    def test_all_zero_lands_in_first_bin(self):
        hist = build_histogram(np.zeros(12), bins=5)
        assert hist.counts[0] == 12
        assert hist.counts[1:].sum() == 0

    def test_single_bin(self):
        hist = build_histogram([0.0, 0.3, 1.0], bins=1)
        assert np.array_equal(hist.counts, [3])

    def test_bad_bins(self):
        with pytest.raises(ValueError, match="bins"):
            build_histogram([0.5], bins=0)

    def test_out_of_range_frequencies(self):
        with pytest.raises(ValueError, match="0, 1"):
            build_histogram([1.5], bins=2)

    @given(
        bins=st.sampled_from([1, 10, 50]),
        rows=st.integers(1, 6),
        cols=st.integers(1, 6),
        seed=st.integers(0, 2**16),
    )
    def test_conservation(self, bins, rows, cols, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 9))
        model = model_with_counts(rng.integers(0, n + 1, size=(rows, cols)), n)
        hist = build_histogram(path_frequencies(model), bins)
        assert int(hist.counts.sum()) == rows * cols
        assert hist.total == rows * cols


class TestTailMass:
    def test_counting(self):
        assert tail_mass([0.1, 0.9, 0.95], 0.8) == pytest.approx(2 / 3)

    def test_threshold_one(self):
        assert tail_mass([0.2, 1.0], 1.0) == 0.0

    def test_threshold_zero_all_positive(self):
        assert tail_mass([0.2, 0.8, 0.4], 0.0) == 1.0

    def test_bad_threshold(self):
        with pytest.raises(ValueError, match="threshold"):
            tail_mass([0.5], 1.2)

    @given(seed=st.integers(0, 2**16))
    def test_non_increasing_in_threshold(self, seed):
        rng = np.random.default_rng(seed)
        freqs = rng.uniform(0, 1, size=30)
        masses = [tail_mass(freqs, t) for t in np.linspace(0, 1, 11)]
        assert all(a >= b for a, b in zip(masses, masses[1:]))
