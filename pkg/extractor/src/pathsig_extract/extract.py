"""Capture a fully-connected layer's weights and per-sample input activations.

The extractor runs a trained torch model over a dataset, hooks the selected
``nn.Linear`` layer, and writes the layer's weights, bias, captured *input*
activations and labels as NPY files plus a manifest in the pathsig dump
schema. Downstream analysis then never needs to re-run the model.

Models resolve from either a checkpoint path (a pickled ``nn.Module`` or
TorchScript file) or a torchvision model name (``inception_v3``,
``resnet50``, ``vit_b_32``, ...) whose pretrained weights must already be
cached locally.

Datasets are directories holding ``inputs.npy`` (one sample per row, any
trailing shape the model accepts), ``labels.npy`` and ``class_names.json``;
label-free sources (e.g. digit photos with no matching class universe) use
``label_free=True`` and produce a dump with the single class ``"all"``,
analyzable only class-agnostically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .mapping import load_mapping, map_labels

_DTYPES = {"f32": np.float32, "f64": np.float64}


@dataclass
class ExtractionJob:
    model: str
    data_root: str
    out_dir: str
    layer: str = "final"            # final | second_last
    split: str | None = None
    mapping_file: str | None = None
    cap: int | None = None
    label_free: bool = False
    dtype: str = "f32"
    batch_size: int = 64
    capture_preactivations: bool = False

    def __post_init__(self):
        if self.layer not in ("final", "second_last"):
            raise ValueError(f"layer must be 'final' or 'second_last', got {self.layer!r}")
        if self.cap is not None and self.cap < 1:
            raise ValueError("sample cap must be >= 1")
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be 'f32' or 'f64', got {self.dtype!r}")
        if self.label_free and self.mapping_file:
            raise ValueError("label-free extraction cannot apply a class mapping")


def resolve_model(spec: str) -> nn.Module:
    """Load a checkpoint path or a torchvision model name, in eval mode."""
    path = Path(spec)
    if path.exists():
        model = torch.load(path, map_location="cpu", weights_only=False)
        if isinstance(model, dict):
            raise ValueError(
                f"{spec} holds a bare state dict; save the full module instead"
            )
        if isinstance(model, torch.jit.ScriptModule):
            raise ValueError(
                f"{spec} is a TorchScript module, which cannot take activation "
                "hooks; save the eager module with torch.save instead"
            )
        return model.eval()
    try:
        from torchvision import models as tv_models

        model = tv_models.get_model(spec, weights="DEFAULT")
    except Exception as exc:
        raise ValueError(f"cannot resolve model {spec!r}: {exc}") from exc
    return model.eval()


def select_linear(model: nn.Module, layer: str):
    """Pick the final or second-to-last fully-connected layer."""
    linears = [m for m in model.modules() if isinstance(m, nn.Linear)]
    if not linears:
        raise ValueError("model has no fully-connected layers")
    if layer == "final":
        return linears[-1]
    if len(linears) < 2:
        raise ValueError("model has no second-to-last fully-connected layer")
    return linears[-2]


def _load_dataset(job: ExtractionJob):
    root = Path(job.data_root)
    if job.split:
        root = root / job.split
    inputs_path = root / "inputs.npy"
    if not inputs_path.exists():
        raise ValueError(f"dataset {root} has no inputs.npy")
    inputs = np.load(inputs_path)
    if job.label_free:
        labels = np.zeros(inputs.shape[0], dtype=np.int64)
        class_names = ["all"]
    else:
        labels_path = root / "labels.npy"
        names_path = root / "class_names.json"
        if not labels_path.exists() or not names_path.exists():
            raise ValueError(
                f"dataset {root} needs labels.npy and class_names.json "
                "(or pass label_free=True)"
            )
        labels = np.load(labels_path).astype(np.int64)
        class_names = json.loads(names_path.read_text())
        if labels.shape[0] != inputs.shape[0]:
            raise ValueError("inputs and labels disagree on the sample count")
        if labels.size and (labels.min() < 0 or labels.max() >= len(class_names)):
            raise ValueError("labels out of range for class_names")
    return inputs, labels, class_names


def extract(job: ExtractionJob) -> Path:
    """Run the extraction and return the written manifest path."""
    model = resolve_model(job.model)
    target = select_linear(model, job.layer)

    inputs, labels, class_names = _load_dataset(job)
    dropped = 0
    if job.mapping_file:
        mapping = load_mapping(job.mapping_file)
        mapped = map_labels([class_names[i] for i in labels], mapping)
        inputs = inputs[mapped.kept_indices]
        labels = mapped.labels
        class_names = mapped.class_names
        dropped = mapped.dropped
        if labels.size == 0:
            raise ValueError("no samples left after label mapping")
    if job.cap is not None:
        inputs = inputs[: job.cap]
        labels = labels[: job.cap]

    captured_in: list[np.ndarray] = []
    captured_out: list[np.ndarray] = []

    def pre_hook(_module, args):
        captured_in.append(args[0].detach().cpu().double().numpy())

    def post_hook(_module, _args, output):
        captured_out.append(output.detach().cpu().double().numpy())

    handles = [target.register_forward_pre_hook(pre_hook)]
    if job.capture_preactivations:
        handles.append(target.register_forward_hook(post_hook))
    try:
        tensor = torch.from_numpy(np.ascontiguousarray(inputs)).float()
        with torch.no_grad():
            for start in range(0, tensor.shape[0], job.batch_size):
                model(tensor[start : start + job.batch_size])
    finally:
        for h in handles:
            h.remove()

    activations = np.concatenate(captured_in, axis=0)
    if activations.ndim != 2:
        raise ValueError(
            f"layer receives {activations.ndim}-D activations; only layers fed "
            "one vector per sample are supported"
        )
    if activations.shape[0] != labels.shape[0]:
        raise ValueError(
            "captured activation count does not match the sample count "
            "(does the model call the selected layer more than once?)"
        )

    weight = target.weight.detach().cpu().double().numpy()
    bias = target.bias.detach().cpu().double().numpy() if target.bias is not None else None

    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    np_dtype = _DTYPES[job.dtype]
    np.save(out_dir / "weights.npy", weight.astype(np_dtype))
    np.save(out_dir / "activations.npy", activations.astype(np_dtype))
    np.save(out_dir / "labels.npy", labels.astype(np_dtype))
    if bias is not None:
        np.save(out_dir / "bias.npy", bias.astype(np_dtype))
    if job.capture_preactivations:
        np.save(
            out_dir / "preactivations.npy",
            np.concatenate(captured_out, axis=0).astype(np_dtype),
        )

    model_id = Path(job.model).stem if Path(job.model).exists() else job.model
    manifest = {
        "model_id": model_id,
        "layer_id": job.layer,
        "weight_file": "weights.npy",
        "bias_file": "bias.npy" if bias is not None else None,
        "activation_file": "activations.npy",
        "label_file": "labels.npy",
        "class_names": list(class_names),
        "dtype": job.dtype,
        "sample_count": int(labels.shape[0]),
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    report = {
        "model": job.model,
        "layer": job.layer,
        "retained_samples": int(labels.shape[0]),
        "dropped_unmapped": dropped,
        "mapping_file": job.mapping_file,
        "label_free": job.label_free,
    }
    (out_dir / "extraction_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    return manifest_path
