"""Desk-scale memorisation and distribution-shift experiments.

The memorisation run trains three networks from a shared init — untrained
(zero epochs), shuffled labels and true labels — evaluates all of them on the
same labelled data, and reports the class-separation scalars side by side.
An optional mean shift of the evaluation blobs produces the OOD comparison
for the true-label model.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mlp, report

CONDITIONS = ("untrained", "random_labels", "normal_labels")


@dataclass
class MemorisationConfig:
    out_dir: str = "memorisation_out"
    seed: int = 0
    classes: int = 3
    dim: int = 8
    per_class: int = 200
    sigma: float = 1.0
    mean_scale: float = 2.0
    hidden: tuple = (32,)
    epochs: int = 200
    batch_size: int = 32
    lr0: float = 0.01
    lr_decay: float = 0.95
    threshold_mode: str = "literal"
    alpha: float = 0.5
    bins: int = 50
    metrics: list = field(default_factory=lambda: ["path-kl"])
    layer: str = "final"
    ood_shift_sigmas: float | None = None

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("the experiment needs at least 2 classes")
        if self.dim < 1 or self.per_class < 1:
            raise ValueError("dim and per_class must be >= 1")
        self.hidden = tuple(int(h) for h in self.hidden)
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be >= 1")


def train_conditions(cfg: MemorisationConfig):
    """Returns (eval_dataset, {condition: (layers, final_train_accuracy)}).

    Class statistics are computed on a held-out draw from the same blob
    distribution, not on the training samples themselves; evaluating on the
    training set would let a noise-memorising network smuggle its memorised
    labels into the class models.
    """
    train_data = mlp.gen_blobs(
        cfg.classes,
        cfg.dim,
        cfg.per_class,
        sigma=cfg.sigma,
        seed=cfg.seed,
        mean_scale=cfg.mean_scale,
    )
    # same means (first draws of the seed stream), fresh noise
    eval_data = mlp.gen_blobs(
        cfg.classes,
        cfg.dim,
        cfg.per_class,
        means=_blob_means(cfg),
        sigma=cfg.sigma,
        seed=cfg.seed + 4,
    )
    shuffled = mlp.shuffle_labels(train_data, seed=cfg.seed + 1)
    init = mlp.init_network([cfg.dim, *cfg.hidden, cfg.classes], seed=cfg.seed + 2)
    tcfg = mlp.TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        lr0=cfg.lr0,
        lr_decay_per_epoch=cfg.lr_decay,
        seed=cfg.seed + 3,
    )
    normal, normal_trace = mlp.train_sgd(init, train_data, tcfg)
    random_l, random_trace = mlp.train_sgd(init, shuffled, tcfg)
    models = {
        "untrained": (init, None),
        "random_labels": (random_l, random_trace["accuracy"][-1]),
        "normal_labels": (normal, normal_trace["accuracy"][-1]),
    }
    return eval_data, models


def _blob_means(cfg: MemorisationConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    return rng.normal(0.0, cfg.mean_scale, size=(cfg.classes, cfg.dim))


def run_memorisation(cfg: MemorisationConfig) -> dict:
    """Full three-condition experiment; writes a bundle, returns its summary."""
    out = Path(cfg.out_dir)
    data, models = train_conditions(cfg)
    class_names = [f"class_{c}" for c in range(cfg.classes)]

    manifests = []
    for condition in CONDITIONS:
        layers, _ = models[condition]
        manifests.append(
            mlp.export_dump(
                layers,
                data,
                out / "dumps" / condition,
                class_names=class_names,
                layer=cfg.layer,
                model_id=condition,
            )
        )
    run_cfg = report.RunConfig(
        inputs=[str(m) for m in manifests],
        threshold_mode=cfg.threshold_mode,
        alpha=cfg.alpha,
        bins=cfg.bins,
        metrics=list(cfg.metrics),
        out_dir=str(out / "analysis"),
        seed=cfg.seed,
        shared_scale=True,
    )
    analyses = report.run_analyze(run_cfg, write_bundle_index=False)

    rows = []
    for condition in CONDITIONS:
        analysis = analyses[f"{condition}__{cfg.layer}"]
        rows.append(
            {
                "condition": condition,
                "mean_inter_class_kl": analysis.summary["mean_inter_class_kl"],
                "mean_class_entropy": analysis.summary["mean_class_entropy"],
                "final_train_accuracy": models[condition][1],
            }
        )
    summary = {"conditions": rows}
    summary.update(run_cfg.provenance())

    if cfg.ood_shift_sigmas is not None:
        summary["ood"] = _ood_section(cfg, out, data, models["normal_labels"][0], class_names)

    report.write_json(out / "memorisation_summary.json", summary)
    _write_condition_table(out / "memorisation_table.csv", rows)
    report.write_index(out, {"experiment": "memorisation"})
    return summary


def _ood_section(cfg: MemorisationConfig, out: Path, data, trained_layers, class_names) -> dict:
    """Evaluate the true-label model on mean-shifted blobs and compare."""
    shift = np.full(cfg.dim, cfg.ood_shift_sigmas * cfg.sigma)
    # the evaluation set itself, mean-shifted (paired seeds)
    shifted = mlp.gen_blobs(
        cfg.classes,
        cfg.dim,
        cfg.per_class,
        means=_blob_means(cfg),
        sigma=cfg.sigma,
        seed=cfg.seed + 4,
        shift=shift,
    )
    ood_manifest = mlp.export_dump(
        trained_layers,
        shifted,
        out / "dumps" / "ood_shifted",
        class_names=class_names,
        layer=cfg.layer,
        model_id="normal_labels_ood",
    )
    compare_cfg = report.RunConfig(
        inputs=[],
        threshold_mode=cfg.threshold_mode,
        alpha=cfg.alpha,
        bins=cfg.bins,
        out_dir=str(out / "ood_compare"),
        seed=cfg.seed,
    )
    id_manifest = out / "dumps" / "normal_labels" / "manifest.json"
    comparison = report.run_compare(compare_cfg, id_manifest, ood_manifest)
    return {
        "shift_sigmas": cfg.ood_shift_sigmas,
        "id_mean_inter_class_kl": comparison["id"]["mean_inter_class_kl"],
        "ood_mean_inter_class_kl": comparison["ood"]["mean_inter_class_kl"],
        "id_mean_class_entropy": comparison["id"]["mean_class_entropy"],
        "ood_mean_class_entropy": comparison["ood"]["mean_class_entropy"],
        "delta_ood_minus_id": comparison["delta_ood_minus_id"],
        "mean_id_ood_distance": comparison["mean_id_ood_distance"],
    }


def _write_condition_table(path: Path, rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["condition", "mean_inter_class_kl", "mean_class_entropy", "final_train_accuracy"]
    )
    for row in rows:
        writer.writerow(
            [
                row["condition"],
                repr(float(row["mean_inter_class_kl"])),
                repr(float(row["mean_class_entropy"])),
                "" if row["final_train_accuracy"] is None else repr(float(row["final_train_accuracy"])),
            ]
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
