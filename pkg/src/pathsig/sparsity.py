"""Path-significance frequency histograms and tail statistics.

Frequencies are *unsmoothed* ratios ``counts / sample_count``: histograms
describe the observed data, not the inferential model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .class_stats import BernoulliClassModel

DEFAULT_BINS = 50


@dataclass
class Histogram:
    """Equal-width histogram over [0, 1]; the final bin is closed on the right."""

    bin_edges: np.ndarray    # (bins + 1,) floats, first 0, last 1
    counts: np.ndarray       # (bins,) int64
    total: int


def path_frequencies(model: BernoulliClassModel) -> np.ndarray:
    """Per-path significance frequency, flattened row-major."""
    if model.sample_count < 1:
        raise ValueError(f"class {model.class_id!r} has no samples")
    return model.counts.ravel() / float(model.sample_count)


def build_histogram(freqs, bins: int = DEFAULT_BINS) -> Histogram:
    """Bin frequencies into ``bins`` equal-width intervals on [0, 1]."""
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    freqs = np.asarray(freqs, dtype=np.float64)
    if freqs.size and (freqs.min() < 0 or freqs.max() > 1):
        raise ValueError("frequencies must lie in [0, 1]")
    counts, edges = np.histogram(freqs, bins=bins, range=(0.0, 1.0))
    return Histogram(bin_edges=edges, counts=counts.astype(np.int64), total=int(freqs.size))


def tail_mass(freqs, threshold: float) -> float:
    """Fraction of paths whose significance frequency exceeds ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    freqs = np.asarray(freqs, dtype=np.float64)
    if freqs.size == 0:
        raise ValueError("no frequencies given")
    return float(np.mean(freqs > threshold))
