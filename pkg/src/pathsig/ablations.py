"""Alternative separation metrics run against the same fixtures as path KL.

Three metrics:

- KL between row-softmaxed per-class *prototype* interaction matrices,
- KL between collections of softmax outputs (the activation space itself),
- expected pairwise Euclidean distance between activation point clouds.

All pairwise loops support an optional seeded sub-sampling cap because full
pair enumeration is quadratic; at desk scale the cap defaults to off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import xlogy

from . import validation

CLAMP = 1e-12


@dataclass
class ClassPointCloud:
    """A bag of vectors (softmax outputs or embeddings) for one class."""

    class_id: object
    points: np.ndarray   # (P, D)

    def __post_init__(self):
        self.points = validation.as_float_matrix(self.points, f"points[{self.class_id!r}]")


def _check_clouds(clouds: list[ClassPointCloud]) -> None:
    if len(clouds) < 1:
        raise ValueError("need at least one point cloud")
    dim = clouds[0].points.shape[1]
    for c in clouds:
        if c.points.shape[1] != dim:
            raise ValueError(
                f"cloud {c.class_id!r} has dimension {c.points.shape[1]}, expected {dim}"
            )


def row_softmax(matrix) -> np.ndarray:
    """Numerically stable softmax applied to each row."""
    m = validation.as_float_matrix(matrix, "matrix")
    z = m - m.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _kl_all_pairs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Categorical KL(x_p || y_q) for every pair of rows, with clamped inputs."""
    xc = np.clip(x, CLAMP, None)
    yc = np.clip(y, CLAMP, None)
    self_term = xlogy(xc, xc).sum(axis=1)
    return self_term[:, None] - xc @ np.log(yc).T


def _subsample_mean(matrix: np.ndarray, exclude_diagonal: bool, max_pairs, rng) -> float | None:
    """Mean over pair entries, optionally capped at max_pairs random picks."""
    p, q = matrix.shape
    if exclude_diagonal:
        if p < 2:
            return None
        values = matrix[~np.eye(p, dtype=bool)]
    else:
        values = matrix.ravel()
    if max_pairs is not None and values.size > max_pairs:
        values = values[rng.choice(values.size, size=max_pairs, replace=False)]
    return float(values.mean())


@dataclass
class PrototypeKLResult:
    labels: list
    matrix: np.ndarray       # off-diagonal: mean row-wise KL; diagonal: row entropy
    inter_mean: float | None
    intra_mean: float


def prototype_interaction_kl(
    per_class_mean_n: list[np.ndarray], class_ids: list | None = None
) -> PrototypeKLResult:
    """Row-softmax each class's mean interaction matrix and compare rows.

    The pairwise divergence between classes is the mean over matching rows of
    the categorical KL between their softmaxed rows; intra-class spread is
    the mean categorical entropy of the softmaxed prototype rows.
    """
    if len(per_class_mean_n) < 1:
        raise ValueError("need at least one prototype")
    protos = [validation.as_float_matrix(m, "prototype") for m in per_class_mean_n]
    shape = protos[0].shape
    for m in protos:
        if m.shape != shape:
            raise ValueError(f"prototype shapes differ: {m.shape} vs {shape}")
    if class_ids is None:
        class_ids = list(range(len(protos)))

    soft = [row_softmax(m) for m in protos]
    k = len(soft)
    matrix = np.zeros((k, k), dtype=np.float64)
    entropies = np.empty(k, dtype=np.float64)
    for i in range(k):
        si = np.clip(soft[i], CLAMP, None)
        entropies[i] = float((-xlogy(si, si)).sum(axis=1).mean())
        matrix[i, i] = entropies[i]
        for j in range(k):
            if i == j:
                continue
            per_row = _kl_all_pairs(soft[i], soft[j])
            matrix[i, j] = float(np.diagonal(per_row).mean())

    inter = None
    if k >= 2:
        inter = float(matrix[~np.eye(k, dtype=bool)].mean())
    return PrototypeKLResult(
        labels=list(class_ids),
        matrix=matrix,
        inter_mean=inter,
        intra_mean=float(entropies.mean()),
    )


@dataclass
class SoftmaxKLResult:
    inter_mean: float | None    # None with a single class
    intra_mean: float | None    # None when no class has two points


def softmax_output_kl(
    clouds: list[ClassPointCloud],
    max_pairs: int | None = None,
    seed: int = 0,
) -> SoftmaxKLResult:
    """Mean categorical KL between and within collections of softmax outputs.

    Inter averages KL(x || y) over ordered class pairs and all cross sample
    pairs; intra does the same within each class over distinct sample pairs.
    Points must already be probability vectors.
    """
    _check_clouds(clouds)
    for c in clouds:
        sums = c.points.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9) or c.points.min() < 0:
            raise ValueError(
                f"cloud {c.class_id!r} does not hold probability vectors"
            )
    rng = np.random.default_rng(seed)

    inter_vals = []
    for i, a in enumerate(clouds):
        for j, b in enumerate(clouds):
            if i == j:
                continue
            inter_vals.append(
                _subsample_mean(_kl_all_pairs(a.points, b.points), False, max_pairs, rng)
            )
    intra_vals = []
    for c in clouds:
        v = _subsample_mean(_kl_all_pairs(c.points, c.points), True, max_pairs, rng)
        if v is not None:
            intra_vals.append(v)

    return SoftmaxKLResult(
        inter_mean=float(np.mean(inter_vals)) if inter_vals else None,
        intra_mean=float(np.mean(intra_vals)) if intra_vals else None,
    )


@dataclass
class EnergyDistanceResult:
    labels: list
    matrix: np.ndarray          # off-diagonal: inter mean distance; diagonal: intra (NaN if undefined)
    inter_mean: float | None
    intra_mean: float | None


def energy_distances(
    clouds: list[ClassPointCloud],
    max_pairs: int | None = None,
    seed: int = 0,
) -> EnergyDistanceResult:
    """Expected pairwise Euclidean distances between and within class clouds.

    Inter (c, c') is the mean distance over all cross pairs; intra (c) the
    mean over distinct within-class pairs, undefined (NaN) for singletons.
    """
    _check_clouds(clouds)
    rng = np.random.default_rng(seed)
    k = len(clouds)
    matrix = np.full((k, k), np.nan, dtype=np.float64)

    intra_vals = []
    for i, c in enumerate(clouds):
        if c.points.shape[0] >= 2:
            d = pdist(c.points)
            if max_pairs is not None and d.size > max_pairs:
                d = d[rng.choice(d.size, size=max_pairs, replace=False)]
            matrix[i, i] = float(d.mean())
            intra_vals.append(matrix[i, i])
    inter_vals = []
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            d = cdist(clouds[i].points, clouds[j].points).ravel()
            if max_pairs is not None and d.size > max_pairs:
                d = d[rng.choice(d.size, size=max_pairs, replace=False)]
            matrix[i, j] = float(d.mean())
            inter_vals.append(matrix[i, j])

    return EnergyDistanceResult(
        labels=[c.class_id for c in clouds],
        matrix=matrix,
        inter_mean=float(np.mean(inter_vals)) if inter_vals else None,
        intra_mean=float(np.mean(intra_vals)) if intra_vals else None,
    )
