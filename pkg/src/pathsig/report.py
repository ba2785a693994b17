"""Report bundles: CSV/JSON tables, PPM heatmaps and hashed file indexes.

Every writer here is deterministic — sorted JSON keys, repr'd floats, no
timestamps — so re-running a command with the same config and seed yields a
byte-identical bundle. ``index.json`` lists every produced file with its
SHA-256 content hash.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import divergences, sparsity, tensorio
from .ablations import (
    ClassPointCloud,
    energy_distances,
    prototype_interaction_kl,
    row_softmax,
    softmax_output_kl,
)
from .class_stats import fit_class_models, save_model
from .interactions import parse_threshold_mode, sample_masks

METRICS = ("path-kl", "prototype-kl", "softmax-kl", "energy")


@dataclass
class RunConfig:
    """Everything an analysis invocation needs; mirrors the JSON config."""

    inputs: list[str] = field(default_factory=list)
    threshold_mode: str = "literal"
    alpha: float = 0.5
    bins: int = sparsity.DEFAULT_BINS
    metrics: list[str] = field(default_factory=lambda: ["path-kl"])
    out_dir: str = "pathsig_out"
    seed: int = 0
    shared_scale: bool = True
    layer: str | None = None
    export_masks: bool = False

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.bins < 1:
            raise ValueError("bins must be >= 1")
        parse_threshold_mode(self.threshold_mode)
        if self.metrics == ["all"]:
            self.metrics = list(METRICS)
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ValueError(f"unknown metrics: {sorted(unknown)} (expected {METRICS})")

    def provenance(self) -> dict:
        return {
            "threshold_mode": self.threshold_mode,
            "alpha": self.alpha,
            "bins": self.bins,
            "kl_reduction": "per-coordinate-mean",
            "pair_mean": "ordered",
            "seed": self.seed,
        }


def jsonify(obj):
    """Recursively convert numpy values for JSON; NaN becomes null."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not np.isfinite(v) else v
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonify(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_matrix_csv(path, labels, matrix) -> Path:
    """Square matrix with the same labels on rows and columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([""] + [str(l) for l in labels])
    for label, row in zip(labels, np.asarray(matrix)):
        writer.writerow([str(label)] + [repr(float(v)) for v in row])
    path.write_text(buf.getvalue())
    return path


def write_histogram_csv(path, hist: sparsity.Histogram) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_lo", "bin_hi", "count"])
    for lo, hi, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
        writer.writerow([repr(float(lo)), repr(float(hi)), int(count)])
    path.write_text(buf.getvalue())
    return path


def render_ppm(matrix, lo: float, hi: float, cell: int = 24) -> bytes:
    """Binary PPM (P6) grayscale heatmap; one ``cell``-pixel square per entry.

    Values map linearly: ``v = round(255 * (x - lo) / (hi - lo))``, clipped;
    a degenerate range renders as all zeros.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if hi > lo:
        v = np.round(255.0 * (m - lo) / (hi - lo))
        v = np.clip(v, 0, 255).astype(np.uint8)
    else:
        v = np.zeros(m.shape, dtype=np.uint8)
    v = np.repeat(np.repeat(v, cell, axis=0), cell, axis=1)
    header = f"P6\n{v.shape[1]} {v.shape[0]}\n255\n".encode("ascii")
    return header + np.stack([v, v, v], axis=-1).tobytes()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_index(bundle_dir, extra: dict | None = None) -> Path:
    """Hash every file under the bundle into ``index.json``."""
    bundle_dir = Path(bundle_dir)
    files = sorted(
        p for p in bundle_dir.rglob("*") if p.is_file() and p.name != "index.json"
    )
    index = {
        "files": {p.relative_to(bundle_dir).as_posix(): sha256_file(p) for p in files}
    }
    if extra:
        index.update(extra)
    return write_json(bundle_dir / "index.json", index)


def _safe_name(name: str, taken: set[str]) -> str:
    base = re.sub(r"[^A-Za-z0-9._-]+", "_", str(name)) or "unnamed"
    candidate, i = base, 1
    while candidate in taken:
        candidate = f"{base}_{i}"
        i += 1
    taken.add(candidate)
    return candidate


@dataclass
class DumpAnalysis:
    """In-memory results for one dump before anything is written."""

    dump: tensorio.ActivationDump
    models: list                      # non-empty class models, index order
    overall: object
    skipped_classes: list[str]
    matrix: divergences.DivergenceMatrix
    summary: dict
    histograms: dict                  # class name -> Histogram
    metrics: dict                     # metric name -> jsonable payload


def analyze_dump(dump: tensorio.ActivationDump, cfg: RunConfig) -> DumpAnalysis:
    """Run the configured metrics over one dump."""
    per_class, overall = fit_class_models(dump, cfg.threshold_mode)
    models = [m for m in per_class.values() if m.sample_count > 0]
    skipped = [m.class_id for m in per_class.values() if m.sample_count == 0]
    if not models:
        raise tensorio.DumpError("dump has no samples in any class")

    dm = divergences.pairwise_matrix(models, overall, cfg.alpha)
    summary = {
        "model_id": dump.model_id,
        "layer_id": dump.layer_id,
        "sample_count": dump.sample_count,
        "num_classes": len(models),
        "skipped_empty_classes": skipped,
        "mean_inter_class_kl": (
            divergences.mean_inter_class(dm) if len(models) >= 2 else None
        ),
        "mean_class_entropy": divergences.mean_class_entropy(models, cfg.alpha),
        "class_entropies": {
            str(m.class_id): float(dm.kl[i, i]) for i, m in enumerate(models)
        },
    }
    summary.update(cfg.provenance())

    histograms = {
        str(m.class_id): sparsity.build_histogram(
            sparsity.path_frequencies(m), cfg.bins
        )
        for m in models
    }

    metrics: dict = {}
    if "path-kl" in cfg.metrics:
        metrics["path-kl"] = {
            "inter_mean": summary["mean_inter_class_kl"],
            "intra_mean": summary["mean_class_entropy"],
        }
    ablation_needed = set(cfg.metrics) - {"path-kl"}
    if ablation_needed:
        by_class = [
            (m.class_id, dump.activations[dump.labels == idx])
            for idx, m in sorted(
                ((i, m) for i, m in per_class.items() if m.sample_count > 0)
            )
        ]
        if "prototype-kl" in ablation_needed:
            protos = [dump.weights * acts.mean(axis=0)[None, :] for _, acts in by_class]
            res = prototype_interaction_kl(protos, [c for c, _ in by_class])
            metrics["prototype-kl"] = {
                "inter_mean": res.inter_mean,
                "intra_mean": res.intra_mean,
                "labels": res.labels,
                "matrix": res.matrix,
            }
        if "softmax-kl" in ablation_needed or "energy" in ablation_needed:
            bias = dump.bias if dump.bias is not None else 0.0
            if "softmax-kl" in ablation_needed:
                clouds = [
                    ClassPointCloud(c, row_softmax(acts @ dump.weights.T + bias))
                    for c, acts in by_class
                ]
                res = softmax_output_kl(clouds, seed=cfg.seed)
                metrics["softmax-kl"] = {
                    "inter_mean": res.inter_mean,
                    "intra_mean": res.intra_mean,
                }
            if "energy" in ablation_needed:
                clouds = [ClassPointCloud(c, acts) for c, acts in by_class]
                res = energy_distances(clouds, seed=cfg.seed)
                metrics["energy"] = {
                    "inter_mean": res.inter_mean,
                    "intra_mean": res.intra_mean,
                    "labels": res.labels,
                    "matrix": res.matrix,
                }
    return DumpAnalysis(
        dump=dump,
        models=models,
        overall=overall,
        skipped_classes=skipped,
        matrix=dm,
        summary=summary,
        histograms=histograms,
        metrics=metrics,
    )


def _write_dump_bundle(analysis: DumpAnalysis, out_dir: Path, cfg: RunConfig, scale) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    dm = analysis.matrix
    dm.normalisation = "shared-scale" if cfg.shared_scale else "none"
    labels = [str(l) for l in dm.labels]

    write_matrix_csv(out_dir / "kl_matrix.csv", labels, dm.kl)
    write_json(
        out_dir / "kl_matrix.json",
        {
            "labels": labels,
            "kl": dm.kl,
            "diagonal_is_entropy": True,
            "includes_overall": dm.includes_overall,
            "normalisation": dm.normalisation,
            "alpha": dm.alpha,
        },
    )
    lo, hi = scale
    own_lo, own_hi = float(dm.kl.min()), float(dm.kl.max())
    (out_dir / "kl_heatmap.ppm").write_bytes(render_ppm(dm.kl, lo, hi))
    (out_dir / "kl_heatmap_unnormalised.ppm").write_bytes(
        render_ppm(dm.kl, own_lo, own_hi)
    )
    analysis.summary["heatmap_scale"] = {
        "lo": lo,
        "hi": hi,
        "shared": cfg.shared_scale,
        "own_lo": own_lo,
        "own_hi": own_hi,
    }
    write_json(out_dir / "summary.json", analysis.summary)

    taken: set[str] = set()
    for name, hist in analysis.histograms.items():
        stem = _safe_name(name, taken)
        write_histogram_csv(out_dir / "histograms" / f"{stem}.csv", hist)
        write_json(
            out_dir / "histograms" / f"{stem}.json",
            {
                "class": name,
                "bin_edges": hist.bin_edges,
                "counts": hist.counts,
                "total_paths": hist.total,
            },
        )

    taken = set()
    for model in analysis.models + [analysis.overall]:
        stem = _safe_name(model.class_id, taken)
        save_model(model, out_dir / "models", stem, alpha=cfg.alpha)

    if analysis.metrics:
        write_json(out_dir / "metrics.json", analysis.metrics)
        for name in ("prototype-kl", "energy"):
            payload = analysis.metrics.get(name)
            if payload and "matrix" in payload:
                write_matrix_csv(
                    out_dir / f"{name.replace('-', '_')}_matrix.csv",
                    [str(l) for l in payload["labels"]],
                    payload["matrix"],
                )

    if cfg.export_masks:
        mask_dir = out_dir / "masks"
        mask_dir.mkdir(parents=True, exist_ok=True)
        for i, (_, mask) in enumerate(sample_masks(analysis.dump, cfg.threshold_mode)):
            tensorio.write_array(
                mask.astype(np.float64), mask_dir / f"sample_{i:05d}.npy", "f32"
            )


def run_analyze(cfg: RunConfig, write_bundle_index: bool = True) -> dict[str, DumpAnalysis]:
    """Analyze every configured dump into ``cfg.out_dir``; returns analyses by name."""
    if not cfg.inputs:
        raise ValueError("no input manifests configured")
    dumps = [tensorio.load_dump(p) for p in cfg.inputs]
    if cfg.layer is not None:
        dumps = [d for d in dumps if d.layer_id == cfg.layer]
        if not dumps:
            raise tensorio.DumpError(f"no input manifest has layer_id {cfg.layer!r}")

    analyses: dict[str, DumpAnalysis] = {}
    taken: set[str] = set()
    for dump in dumps:
        name = _safe_name(f"{dump.model_id}__{dump.layer_id}", taken)
        analyses[name] = analyze_dump(dump, cfg)

    matrices = [a.matrix.kl for a in analyses.values()]
    if cfg.shared_scale:
        lo = min(float(m.min()) for m in matrices)
        hi = max(float(m.max()) for m in matrices)
        scales = {name: (lo, hi) for name in analyses}
    else:
        scales = {
            name: (float(a.matrix.kl.min()), float(a.matrix.kl.max()))
            for name, a in analyses.items()
        }

    out_root = Path(cfg.out_dir)
    for name, analysis in analyses.items():
        _write_dump_bundle(analysis, out_root / name, cfg, scales[name])
    if write_bundle_index:
        write_index(out_root, {"config": _config_echo(cfg), "runs": sorted(analyses)})
    return analyses


def _config_echo(cfg: RunConfig) -> dict:
    # out_dir is the bundle's own location; embedding it would make otherwise
    # identical bundles differ by where they were written
    echo = dict(vars(cfg))
    echo["inputs"] = [str(p) for p in echo["inputs"]]
    del echo["out_dir"]
    return echo


def run_compare(cfg: RunConfig, id_manifest, ood_manifest) -> dict:
    """ID-vs-OOD comparison of two dumps; writes the report and returns it."""
    id_dump = tensorio.load_dump(id_manifest)
    ood_dump = tensorio.load_dump(ood_manifest)
    id_analysis = analyze_dump(id_dump, cfg)
    ood_analysis = analyze_dump(ood_dump, cfg)
    result = divergences.id_ood_distance(
        id_analysis.models, ood_analysis.models, cfg.alpha
    )

    def scalars(a: DumpAnalysis) -> dict:
        return {
            "mean_inter_class_kl": a.summary["mean_inter_class_kl"],
            "mean_class_entropy": a.summary["mean_class_entropy"],
            "model_id": a.dump.model_id,
            "layer_id": a.dump.layer_id,
        }

    id_scalars, ood_scalars = scalars(id_analysis), scalars(ood_analysis)
    delta = {}
    for key in ("mean_inter_class_kl", "mean_class_entropy"):
        if id_scalars[key] is not None and ood_scalars[key] is not None:
            delta[key] = ood_scalars[key] - id_scalars[key]
        else:
            delta[key] = None
    summary = {
        "id": id_scalars,
        "ood": ood_scalars,
        "delta_ood_minus_id": delta,
        "shared_classes": [str(c) for c in result.labels],
        "dropped_id_classes": [str(c) for c in result.dropped_id],
        "dropped_ood_classes": [str(c) for c in result.dropped_ood],
        "mean_id_ood_distance": float(result.vector.mean()),
        "id_ood_distances": {
            str(c): float(v) for c, v in zip(result.labels, result.vector)
        },
    }
    summary.update(cfg.provenance())

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = [str(c) for c in result.labels]
    write_matrix_csv(out / "id_ood_cross.csv", labels, result.cross)
    write_json(
        out / "id_ood_cross.json",
        {"labels": labels, "kl_id_vs_ood": result.cross, "alpha": cfg.alpha},
    )
    (out / "id_ood_heatmap.ppm").write_bytes(
        render_ppm(result.cross, float(result.cross.min()), float(result.cross.max()))
    )
    write_json(out / "compare_summary.json", summary)
    write_index(out, {"config": _config_echo(cfg)})
    return summary
