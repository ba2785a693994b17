"""Pairwise Bernoulli KL matrices, summary scalars and ID-vs-OOD distances.

The reported scalar is the *per-coordinate mean* KL so values stay comparable
across layer sizes; the raw coordinate sum is available via
``reduction="sum"``. Inter-class means average over ordered pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .class_stats import OVERALL_ID, BernoulliClassModel, class_entropy
from .validation import check_same_shape


def bernoulli_kl(p, q, reduction: str = "mean") -> float:
    """KL divergence between two matrices of independent Bernoulli parameters.

    Coordinate-wise ``p*ln(p/q) + (1-p)*ln((1-p)/(1-q))`` reduced by mean
    (default) or sum. ``q`` must be strictly inside (0, 1); ``p`` may touch
    the boundary (0*ln 0 := 0).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    check_same_shape(p, q, "probability matrices")
    if p.min() < 0 or p.max() > 1:
        raise ValueError("p must lie in [0, 1]")
    if q.min() <= 0 or q.max() >= 1:
        raise ValueError(
            "q touches {0, 1}; KL is undefined there (finalize with alpha > 0)"
        )
    if reduction not in ("mean", "sum"):
        raise ValueError(f"reduction must be 'mean' or 'sum', got {reduction!r}")
    terms = xlogy(p, p / q) + xlogy(1.0 - p, (1.0 - p) / (1.0 - q))
    return float(terms.mean() if reduction == "mean" else terms.sum())


@dataclass
class DivergenceMatrix:
    """Pairwise KL with per-class entropy on the diagonal.

    When ``includes_overall`` is set, the last row/column holds divergences
    against the class-agnostic model and the last label is ``"overall"``.
    """

    labels: list
    kl: np.ndarray
    includes_overall: bool = True
    normalisation: str = "none"
    alpha: float = 0.5

    @property
    def num_classes(self) -> int:
        return len(self.labels) - (1 if self.includes_overall else 0)

    def class_block(self) -> np.ndarray:
        k = self.num_classes
        return self.kl[:k, :k]


def pairwise_matrix(
    models: list[BernoulliClassModel],
    overall: BernoulliClassModel | None = None,
    alpha: float = 0.5,
) -> DivergenceMatrix:
    """KL between every ordered pair of class models; entropies on the diagonal."""
    if len(models) < 1:
        raise ValueError("need at least one class model")
    entries = list(models) + ([overall] if overall is not None else [])
    shape = entries[0].shape
    for m in entries:
        if m.shape != shape:
            raise ValueError(f"model {m.class_id!r} has shape {m.shape}, expected {shape}")
    probs = [m.finalize(alpha) for m in entries]

    k = len(entries)
    kl = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            if i == j:
                kl[i, j] = class_entropy(probs[i])
            else:
                kl[i, j] = bernoulli_kl(probs[i], probs[j])
    labels = [m.class_id for m in models]
    if overall is not None:
        labels.append(OVERALL_ID)
    return DivergenceMatrix(
        labels=labels,
        kl=kl,
        includes_overall=overall is not None,
        alpha=alpha,
    )


def mean_inter_class(dm: DivergenceMatrix) -> float:
    """Mean off-diagonal KL over the class block (overall row/col excluded)."""
    k = dm.num_classes
    if k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    block = dm.class_block()
    off = ~np.eye(k, dtype=bool)
    return float(block[off].mean())


def mean_class_entropy(models: list[BernoulliClassModel], alpha: float = 0.5) -> float:
    """Unweighted mean of per-class entropies."""
    if len(models) < 1:
        raise ValueError("need at least one class model")
    return float(np.mean([class_entropy(m.finalize(alpha)) for m in models]))


@dataclass
class IdOodResult:
    """Distances between matching-class models of two runs."""

    labels: list
    vector: np.ndarray       # KL(p_c_id || p_c_ood) per shared class
    cross: np.ndarray        # (c, c') -> KL(p_c_id || p_c'_ood)
    alpha: float = 0.5
    dropped_id: list = field(default_factory=list)
    dropped_ood: list = field(default_factory=list)


def id_ood_distance(
    id_models: list[BernoulliClassModel],
    ood_models: list[BernoulliClassModel],
    alpha: float = 0.5,
) -> IdOodResult:
    """Per-class and cross-class KL between two runs' class models.

    Classes are matched by id; the intersection is taken in the order of the
    first argument. An empty intersection is an error.
    """
    ood_by_id = {m.class_id: m for m in ood_models}
    shared = [m.class_id for m in id_models if m.class_id in ood_by_id]
    if not shared:
        raise ValueError("the two runs share no classes")
    id_by_id = {m.class_id: m for m in id_models}

    p_id = [id_by_id[c].finalize(alpha) for c in shared]
    p_ood = [ood_by_id[c].finalize(alpha) for c in shared]
    k = len(shared)
    cross = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            cross[i, j] = bernoulli_kl(p_id[i], p_ood[j])
    return IdOodResult(
        labels=shared,
        vector=np.diagonal(cross).copy(),
        cross=cross,
        alpha=alpha,
        dropped_id=[m.class_id for m in id_models if m.class_id not in ood_by_id],
        dropped_ood=[m.class_id for m in ood_models if m.class_id not in id_by_id],
    )
