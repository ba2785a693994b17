"""Streaming per-class Bernoulli path models.

Each class accumulates an integer count matrix of how often every path was
significant, together with the number of samples seen. Accumulators are
single-writer; cross-worker aggregation goes through :meth:`merge`, which is
exact, so any partition of a sample stream reproduces the sequential result
bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.special import xlogy

from . import validation
from .interactions import sample_masks
from .tensorio import ActivationDump, read_array, write_array

OVERALL_ID = "overall"


class BernoulliClassModel:
    """Significance counts for one class (or the class-agnostic pool)."""

    def __init__(self, shape: tuple[int, int], class_id):
        self.counts = np.zeros(shape, dtype=np.int64)
        self.sample_count = 0
        self.class_id = class_id

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def add(self, mask) -> "BernoulliClassModel":
        """Accumulate one significance mask (entries must be 0/1)."""
        mask = np.asarray(mask)
        if mask.shape != self.counts.shape:
            raise ValueError(
                f"mask shape {mask.shape} != model shape {self.counts.shape}"
            )
        if not np.isin(mask, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        self.counts += mask.astype(np.int64)
        self.sample_count += 1
        return self

    def merge(self, other: "BernoulliClassModel") -> "BernoulliClassModel":
        """Exact sum of two accumulators over the same class."""
        if other.class_id != self.class_id:
            raise ValueError(
                f"cannot merge models for classes {self.class_id!r} and "
                f"{other.class_id!r}"
            )
        if other.counts.shape != self.counts.shape:
            raise ValueError(
                f"cannot merge shapes {self.counts.shape} and {other.counts.shape}"
            )
        merged = BernoulliClassModel(self.counts.shape, self.class_id)
        merged.counts = self.counts + other.counts
        merged.sample_count = self.sample_count + other.sample_count
        return merged

    def finalize(self, alpha: float = 0.5) -> np.ndarray:
        """Smoothed per-path significance probabilities.

        ``p_ij = (counts_ij + alpha) / (sample_count + 2 * alpha)``; the
        default ``alpha = 0.5`` keeps every entry strictly inside (0, 1) so
        KL divergences stay finite.
        """
        if self.sample_count < 1:
            raise ValueError(
                f"class {self.class_id!r} has no samples; cannot finalize"
            )
        if alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        return (self.counts + alpha) / (self.sample_count + 2.0 * alpha)


def class_entropy(p) -> float:
    """Mean binary entropy of a probability matrix, in nats (0*ln 0 := 0)."""
    p = np.asarray(p, dtype=np.float64)
    if p.min() < 0 or p.max() > 1:
        raise ValueError("probabilities must lie in [0, 1]")
    h = -xlogy(p, p) - xlogy(1.0 - p, 1.0 - p)
    return float(h.mean())


def fit_class_models(
    dump: ActivationDump, mode: str = "literal"
) -> tuple[dict[int, BernoulliClassModel], BernoulliClassModel]:
    """Accumulate one model per class plus the class-agnostic pool.

    Returns ``(per_class, overall)`` where ``per_class`` maps every class
    index of the dump (including empty classes) to its accumulator.
    """
    shape = dump.weights.shape
    per_class = {
        idx: BernoulliClassModel(shape, name)
        for idx, name in enumerate(dump.class_names)
    }
    overall = BernoulliClassModel(shape, OVERALL_ID)
    for class_idx, mask in sample_masks(dump, mode):
        per_class[class_idx].add(mask)
        overall.add(mask)
    return per_class, overall


def save_model(model: BernoulliClassModel, directory, stem: str, alpha: float | None = None) -> Path:
    """Serialize counts as NPY plus a JSON sidecar; returns the sidecar path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    counts_file = f"{stem}_counts.npy"
    write_array(model.counts.astype(np.float64), directory / counts_file, "f64")
    sidecar = {
        "class_id": model.class_id,
        "sample_count": model.sample_count,
        "counts_file": counts_file,
        "alpha": alpha,
    }
    sidecar_path = directory / f"{stem}.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return sidecar_path


def load_model(sidecar_path) -> tuple[BernoulliClassModel, float | None]:
    """Inverse of :func:`save_model`; returns ``(model, alpha)``."""
    sidecar_path = Path(sidecar_path)
    meta = json.loads(sidecar_path.read_text())
    counts = read_array(sidecar_path.parent / meta["counts_file"])
    counts = validation.as_float_matrix(counts, "counts")
    if np.any(counts != np.round(counts)) or counts.min() < 0:
        raise ValueError(f"{sidecar_path}: counts must be non-negative integers")
    model = BernoulliClassModel(counts.shape, meta["class_id"])
    model.counts = counts.astype(np.int64)
    model.sample_count = int(meta["sample_count"])
    if np.any(model.counts > model.sample_count):
        raise ValueError(f"{sidecar_path}: counts exceed the sample count")
    return model, meta.get("alpha")
