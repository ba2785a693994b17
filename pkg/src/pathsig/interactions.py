"""Per-sample weight-activation interaction matrices and significance masks.

The interaction matrix for a sample is ``N = W * diag(a)``: entry ``(i, j)``
is the contribution ``w_ij * a_j`` of input neuron ``j`` to output neuron
``i``'s pre-activation (bias excluded, so ``rowsum(N) + b`` recovers the
pre-activation).

Threshold modes for the significance mask:

``literal`` (default)
    ``S_ij = 1  iff  |N_ij| > n * sum_k(N_ik)`` with the *signed* row sum and
    ``n`` the input size. A row whose signed sum is negative is therefore
    entirely significant, which is what makes randomly initialised layers
    register about half of all paths as significant.
``row-mean-abs``
    Row threshold is ``mean_k |N_ik|``.
``quantile:<q>``
    Row threshold is the q-quantile of ``|N_i.|``.

Ties never count as significant (strict inequality in every mode).
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import validation
from .tensorio import ActivationDump

THRESHOLD_MODES = ("literal", "row-mean-abs", "quantile")


def interaction_matrix(weights, activation) -> np.ndarray:
    """``N = W * diag(a)``, i.e. ``N_ij = W_ij * a_j``."""
    w = validation.as_float_matrix(weights, "weights")
    a = validation.as_float_vector(activation, "activation")
    if w.shape[1] != a.shape[0]:
        raise ValueError(
            f"weights have {w.shape[1]} columns but activation has {a.shape[0]} entries"
        )
    return w * a[None, :]


def parse_threshold_mode(mode: str) -> tuple[str, float | None]:
    """Split a mode string into (kind, quantile); quantile is None unless used."""
    if mode == "literal" or mode == "row-mean-abs":
        return mode, None
    if mode.startswith("quantile:"):
        try:
            q = float(mode.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad quantile in threshold mode {mode!r}") from None
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile must be in [0, 1], got {q}")
        return "quantile", q
    raise ValueError(
        f"unknown threshold mode {mode!r}; expected 'literal', 'row-mean-abs' "
        "or 'quantile:<q>'"
    )


def significance_mask(n_matrix, mode: str = "literal") -> np.ndarray:
    """Binary mask of significant paths in an interaction matrix (uint8 0/1)."""
    n = validation.as_float_matrix(n_matrix, "interaction matrix")
    kind, q = parse_threshold_mode(mode)
    mag = np.abs(n)
    if kind == "literal":
        thresholds = n.shape[1] * n.sum(axis=1)
    elif kind == "row-mean-abs":
        thresholds = mag.mean(axis=1)
    else:
        thresholds = np.quantile(mag, q, axis=1)
    return (mag > thresholds[:, None]).astype(np.uint8)


def sample_masks(
    dump: ActivationDump, mode: str = "literal"
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(class_index, mask)`` per sample, in dump order.

    Streams one mask at a time so memory stays constant regardless of the
    number of samples.
    """
    parse_threshold_mode(mode)  # fail fast before streaming
    weights = dump.weights
    for label, activation in zip(dump.labels, dump.activations):
        n = weights * activation[None, :]
        yield int(label), significance_mask(n, mode)
