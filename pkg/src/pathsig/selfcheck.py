"""Bundled oracle suite behind ``pathsig selfcheck``.

Each check is independent of the code path it validates: round-trips,
finite differences, brute-force enumeration and closed forms.
"""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np

from . import mlp, sparsity, tensorio
from .class_stats import BernoulliClassModel
from .divergences import bernoulli_kl
from .interactions import interaction_matrix, significance_mask


def _check_npy_round_trip():
    rng = np.random.default_rng(11)
    with tempfile.TemporaryDirectory() as tmp:
        for dtype, shape in (("f64", (7, 3)), ("f32", (5, 2)), ("f64", (4,))):
            arr = rng.standard_normal(shape)
            if dtype == "f32":
                arr = arr.astype(np.float32)
            path = Path(tmp) / "x.npy"
            tensorio.write_array(arr, path, dtype)
            back = tensorio.read_array(path)
            if back.shape != arr.shape or not np.array_equal(back, arr.astype(back.dtype)):
                raise AssertionError(f"round trip failed for {dtype} {shape}")
            via_numpy = np.load(path)
            if not np.array_equal(via_numpy, back):
                raise AssertionError("numpy disagrees with read_array")


def _check_manifest_validation():
    rng = np.random.default_rng(12)
    with tempfile.TemporaryDirectory() as tmp:
        manifest = tensorio.write_dump(
            tmp,
            weights=rng.standard_normal((3, 4)),
            activations=rng.standard_normal((6, 4)),
            labels=rng.integers(0, 2, size=6),
            class_names=["a", "b"],
        )
        tensorio.load_dump(manifest)
        bad = np.full(6, 9.0)
        tensorio.write_array(bad, Path(tmp) / "labels.npy", "f64")
        try:
            tensorio.load_dump(manifest)
        except tensorio.DumpError:
            return
        raise AssertionError("out-of-range labels were accepted")


def _check_literal_threshold_fixture():
    n = interaction_matrix([[1.0, -1.0], [2.0, 0.0]], [1.0, 1.0])
    mask = significance_mask(n, "literal")
    if not np.array_equal(mask, [[1, 1], [0, 0]]):
        raise AssertionError(f"unexpected mask {mask.tolist()}")


def _check_gradient_finite_difference():
    rng = np.random.default_rng(13)
    layers = mlp.init_network([6, 8, 5, 3], seed=13)
    X = rng.standard_normal((4, 6))
    y = rng.integers(0, 3, size=4)
    _, grads = mlp.loss_and_gradients(layers, X, y)

    def loss_at(model):
        loss, _ = mlp.loss_and_gradients(model, X, y)
        return loss

    worst = 0.0
    for li, layer in enumerate(layers):
        for arr_name in ("weights", "bias"):
            arr = getattr(layer, arr_name)
            grad = grads[li][0 if arr_name == "weights" else 1]
            flat = arr.ravel()
            for k in range(flat.size):
                h = 1e-5 * max(1.0, abs(flat[k]))
                orig = flat[k]
                flat[k] = orig + h
                up = loss_at(layers)
                flat[k] = orig - h
                down = loss_at(layers)
                flat[k] = orig
                numeric = (up - down) / (2 * h)
                analytic = grad.ravel()[k]
                denom = max(1.0, abs(numeric), abs(analytic))
                worst = max(worst, abs(numeric - analytic) / denom)
    if worst > 1e-5:
        raise AssertionError(f"gradient mismatch, worst relative error {worst:.3e}")


def _check_streaming_equals_batch():
    rng = np.random.default_rng(14)
    masks = rng.integers(0, 2, size=(40, 5, 4))
    sequential = BernoulliClassModel((5, 4), 0)
    for m in masks:
        sequential.add(m)
    merged = BernoulliClassModel((5, 4), 0)
    for part in np.array_split(masks, 4):
        chunk = BernoulliClassModel((5, 4), 0)
        for m in part:
            chunk.add(m)
        merged = merged.merge(chunk)
    if not np.array_equal(sequential.counts, merged.counts):
        raise AssertionError("merged counts differ from sequential accumulation")
    if sequential.sample_count != merged.sample_count:
        raise AssertionError("merged sample counts differ")


def _check_kl_axioms():
    rng = np.random.default_rng(15)
    for _ in range(200):
        shape = (int(rng.integers(1, 16)), int(rng.integers(1, 16)))
        n_c = int(rng.integers(1, 20))
        p = (rng.integers(0, n_c + 1, size=shape) + 0.5) / (n_c + 1.0)
        q = (rng.integers(0, n_c + 1, size=shape) + 0.5) / (n_c + 1.0)
        if bernoulli_kl(p, q) < 0:
            raise AssertionError("negative KL")
        if abs(bernoulli_kl(p, p)) > 1e-12:
            raise AssertionError("KL(p, p) != 0")


def _check_kl_closed_form():
    got = bernoulli_kl(np.array([[0.75]]), np.array([[0.25]]))
    if abs(got - 0.5 * math.log(3.0)) > 1e-12:
        raise AssertionError(f"closed form mismatch: {got}")


def _check_energy_345():
    from .ablations import ClassPointCloud, energy_distances

    res = energy_distances(
        [ClassPointCloud("x", [[0.0, 0.0]]), ClassPointCloud("y", [[3.0, 4.0]])]
    )
    if res.inter_mean != 5.0:
        raise AssertionError(f"expected 5.0, got {res.inter_mean}")


def _check_histogram_conservation():
    rng = np.random.default_rng(16)
    for bins in (1, 10, 50):
        model = BernoulliClassModel((6, 7), 0)
        for _ in range(9):
            model.add(rng.integers(0, 2, size=(6, 7)))
        hist = sparsity.build_histogram(sparsity.path_frequencies(model), bins)
        if int(hist.counts.sum()) != 42:
            raise AssertionError(f"bins={bins} lost paths")


CHECKS = (
    ("npy_round_trip", _check_npy_round_trip),
    ("manifest_validation", _check_manifest_validation),
    ("literal_threshold_fixture", _check_literal_threshold_fixture),
    ("gradient_finite_difference", _check_gradient_finite_difference),
    ("streaming_equals_batch", _check_streaming_equals_batch),
    ("kl_axioms", _check_kl_axioms),
    ("kl_closed_form", _check_kl_closed_form),
    ("energy_345", _check_energy_345),
    ("histogram_conservation", _check_histogram_conservation),
)


def run_selfcheck(checks=CHECKS) -> list[tuple[str, bool, str]]:
    """Run every named oracle; returns (name, passed, detail) triples."""
    results = []
    for name, fn in checks:
        try:
            fn()
        except Exception as exc:  # report the failure, keep going
            results.append((name, False, str(exc)))
        else:
            results.append((name, True, ""))
    return results
