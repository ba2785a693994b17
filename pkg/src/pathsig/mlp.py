"""Minimal dense-network forward pass and SGD trainer.

Deliberately tiny: fully-connected layers only, cross-entropy loss, plain
SGD with per-epoch learning-rate decay. Everything is seeded and
single-threaded per run so identical configs reproduce bit-identical
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import tensorio, validation

ACTIVATIONS = ("relu", "identity", "softmax")


class TrainingDiverged(RuntimeError):
    """Raised when the loss stops being finite mid-training."""


@dataclass
class LayerSpec:
    """One dense layer: ``a = f(W x + b)``."""

    weights: np.ndarray    # (m, n)
    bias: np.ndarray       # (m,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = validation.as_float_matrix(self.weights, "weights")
        self.bias = validation.as_float_vector(self.bias, "bias")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ValueError(
                f"bias length {self.bias.shape[0]} != weight rows {self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class LabeledDataset:
    inputs: np.ndarray     # (S, d)
    labels: np.ndarray     # (S,)
    num_classes: int

    def __post_init__(self):
        self.inputs = validation.as_float_matrix(self.inputs, "inputs")
        self.labels = validation.as_label_vector(self.labels, self.num_classes)
        if self.labels.shape[0] != self.inputs.shape[0]:
            raise ValueError("inputs and labels disagree on the sample count")


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    lr0: float = 0.01
    lr_decay_per_epoch: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr0 < 0:
            raise ValueError("lr0 must be >= 0")
        if not 0.0 < self.lr_decay_per_epoch <= 1.0:
            raise ValueError("lr_decay_per_epoch must be in (0, 1]")


def validate_network(layers: list[LayerSpec]) -> None:
    """Check layer chaining and that softmax appears only as the final layer."""
    if not layers:
        raise ValueError("network has no layers")
    for prev, nxt in zip(layers, layers[1:]):
        if nxt.weights.shape[1] != prev.weights.shape[0]:
            raise ValueError(
                f"layer expects {nxt.weights.shape[1]} inputs but previous "
                f"layer emits {prev.weights.shape[0]}"
            )
    for layer in layers[:-1]:
        if layer.activation == "softmax":
            raise ValueError("softmax is only allowed on the final layer")


def init_network(
    layer_sizes,
    seed: int = 0,
    hidden_activation: str = "relu",
    final_activation: str = "softmax",
) -> list[LayerSpec]:
    """Seeded uniform(-1/sqrt(n), 1/sqrt(n)) fan-in init for each layer."""
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output size")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (n, m) in enumerate(zip(sizes, sizes[1:])):
        bound = 1.0 / np.sqrt(n)
        act = final_activation if i == len(sizes) - 2 else hidden_activation
        layers.append(
            LayerSpec(
                weights=rng.uniform(-bound, bound, size=(m, n)),
                bias=rng.uniform(-bound, bound, size=m),
                activation=act,
            )
        )
    validate_network(layers)
    return layers


def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    # softmax over the last axis, shifted for stability
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(layers: list[LayerSpec], x) -> list[tuple[np.ndarray, np.ndarray]]:
    """Forward one sample; returns (pre_activation, post_activation) per layer."""
    validate_network(layers)
    a = validation.as_float_vector(x, "input")
    if a.shape[0] != layers[0].weights.shape[1]:
        raise ValueError(
            f"input has {a.shape[0]} features but the first layer expects "
            f"{layers[0].weights.shape[1]}"
        )
    trace = []
    for layer in layers:
        z = layer.weights @ a + layer.bias
        a = _apply_activation(z, layer.activation)
        trace.append((z, a))
    return trace


def forward_batch(layers: list[LayerSpec], inputs) -> list[tuple[np.ndarray, np.ndarray]]:
    """Batched forward pass; one row per sample in every returned array."""
    validate_network(layers)
    a = validation.as_float_matrix(inputs, "inputs")
    if a.shape[1] != layers[0].weights.shape[1]:
        raise ValueError(
            f"inputs have {a.shape[1]} features but the first layer expects "
            f"{layers[0].weights.shape[1]}"
        )
    trace = []
    for layer in layers:
        z = a @ layer.weights.T + layer.bias
        a = _apply_activation(z, layer.activation)
        trace.append((z, a))
    return trace


def predict_proba(layers: list[LayerSpec], inputs) -> np.ndarray:
    return forward_batch(layers, inputs)[-1][1]


def loss_and_gradients(layers, inputs, labels):
    """Mean cross-entropy over a batch plus its exact gradients.

    Returns ``(loss, [(dW, db), ...])`` with one gradient pair per layer.
    The final layer must be softmax.
    """
    if layers[-1].activation != "softmax":
        raise ValueError("the final layer must be softmax for cross-entropy")
    inputs = validation.as_float_matrix(inputs, "inputs")
    labels = validation.as_label_vector(labels, layers[-1].weights.shape[0])
    trace = forward_batch(layers, inputs)
    probs = trace[-1][1]
    batch = inputs.shape[0]
    picked = probs[np.arange(batch), labels]
    with np.errstate(divide="ignore"):
        loss = float(-np.mean(np.log(picked)))

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)
    delta = probs.copy()
    delta[np.arange(batch), labels] -= 1.0
    delta /= batch
    for idx in range(len(layers) - 1, -1, -1):
        a_prev = inputs if idx == 0 else trace[idx - 1][1]
        grads[idx] = (delta.T @ a_prev, delta.sum(axis=0))
        if idx > 0:
            delta = delta @ layers[idx].weights
            if layers[idx - 1].activation == "relu":
                delta = delta * (trace[idx - 1][0] > 0)
    return loss, grads


def train_sgd(
    layers: list[LayerSpec], dataset: LabeledDataset, cfg: TrainConfig
) -> tuple[list[LayerSpec], dict]:
    """Cross-entropy SGD with per-epoch decay; returns (trained copy, trace).

    Mini-batch order is reshuffled every epoch from the config seed.  The
    input layers are never mutated.
    """
    validate_network(layers)
    if layers[-1].activation != "softmax":
        raise ValueError("the final layer must be softmax")
    if layers[-1].weights.shape[0] != dataset.num_classes:
        raise ValueError(
            f"final layer emits {layers[-1].weights.shape[0]} values but the "
            f"dataset declares {dataset.num_classes} classes"
        )
    n_samples = dataset.inputs.shape[0]
    if cfg.batch_size > n_samples:
        raise ValueError("batch_size exceeds the sample count")

    model = [replace(l, weights=l.weights.copy(), bias=l.bias.copy()) for l in layers]
    rng = np.random.default_rng(cfg.seed)
    trace = {"loss": [], "accuracy": [], "lr": []}

    for epoch in range(cfg.epochs):
        lr = cfg.lr0 * cfg.lr_decay_per_epoch**epoch
        order = rng.permutation(n_samples)
        epoch_loss = 0.0
        for start in range(0, n_samples, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grads = loss_and_gradients(model, dataset.inputs[batch], dataset.labels[batch])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch offset {start} (lr={lr})"
                )
            epoch_loss += loss * batch.size
            for layer, (dw, db) in zip(model, grads):
                layer.weights -= lr * dw
                layer.bias -= lr * db
        preds = predict_proba(model, dataset.inputs).argmax(axis=1)
        trace["loss"].append(epoch_loss / n_samples)
        trace["accuracy"].append(float(np.mean(preds == dataset.labels)))
        trace["lr"].append(lr)
    return model, trace


def shuffle_labels(dataset: LabeledDataset, seed: int = 0) -> LabeledDataset:
    """Uniformly permute the labels, leaving the inputs untouched."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.labels.shape[0])
    return LabeledDataset(
        inputs=dataset.inputs.copy(),
        labels=dataset.labels[perm],
        num_classes=dataset.num_classes,
    )


def gen_blobs(
    num_classes: int,
    dim: int,
    per_class: int,
    means=None,
    sigma: float = 1.0,
    seed: int = 0,
    shift=None,
    sigma_scale: float = 1.0,
    mean_scale: float = 2.0,
) -> LabeledDataset:
    """Gaussian class blobs, deterministic per seed.

    ``means`` defaults to ``num_classes`` seeded draws from N(0, mean_scale^2).
    ``shift`` (scalar or length-``dim`` vector) is added to every sample after
    the noise draw, so two calls with matching seeds differ exactly by the
    shift; ``sigma_scale`` inflates the noise instead (breaking that pairing).
    Both are intended for synthesizing distribution-shifted evaluation sets.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma_scale < 0:
        raise ValueError(f"sigma_scale must be >= 0, got {sigma_scale}")
    if num_classes < 1 or dim < 1 or per_class < 1:
        raise ValueError("num_classes, dim and per_class must all be >= 1")
    rng = np.random.default_rng(seed)
    if means is None:
        means = rng.normal(0.0, mean_scale, size=(num_classes, dim))
    else:
        means = validation.as_float_matrix(means, "means")
        if means.shape != (num_classes, dim):
            raise ValueError(
                f"means must have shape ({num_classes}, {dim}), got {means.shape}"
            )
    blocks = []
    for c in range(num_classes):
        noise = rng.standard_normal(size=(per_class, dim))
        blocks.append(means[c] + sigma * sigma_scale * noise)
    inputs = np.vstack(blocks)
    if shift is not None:
        inputs = inputs + np.asarray(shift, dtype=np.float64)
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    return LabeledDataset(inputs=inputs, labels=labels, num_classes=num_classes)


def resolve_layer(layers: list[LayerSpec], layer: str | int) -> int:
    """Map 'final' / 'second_last' / an index onto a concrete layer index."""
    if layer == "final":
        return len(layers) - 1
    if layer == "second_last":
        if len(layers) < 2:
            raise ValueError("network has no second-to-last layer")
        return len(layers) - 2
    idx = int(layer)
    if not -len(layers) <= idx < len(layers):
        raise ValueError(f"layer index {idx} out of range for {len(layers)} layers")
    return idx % len(layers)


def export_dump(
    layers: list[LayerSpec],
    dataset: LabeledDataset,
    out_dir,
    class_names=None,
    layer: str | int = "final",
    model_id: str = "mlp",
    dtype: str = "f64",
):
    """Serialize one layer plus its per-sample input activations as a dump.

    The activation file holds the *inputs* to the selected layer (the raw
    inputs for layer 0, otherwise the previous layer's outputs), matching the
    dump schema. Returns the manifest path.
    """
    idx = resolve_layer(layers, layer)
    if class_names is None:
        class_names = [f"class_{c}" for c in range(dataset.num_classes)]
    if len(class_names) != dataset.num_classes:
        raise ValueError("class_names length must equal num_classes")
    trace = forward_batch(layers, dataset.inputs)
    layer_inputs = dataset.inputs if idx == 0 else trace[idx - 1][1]
    layer_id = layer if isinstance(layer, str) else f"layer{idx}"
    return tensorio.write_dump(
        out_dir,
        weights=layers[idx].weights,
        bias=layers[idx].bias,
        activations=layer_inputs,
        labels=dataset.labels,
        class_names=class_names,
        model_id=model_id,
        layer_id=layer_id,
        dtype=dtype,
    )
