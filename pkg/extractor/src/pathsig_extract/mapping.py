"""Label remapping between dataset class universes and class subsetting.

A mapping file is a JSON object ``{target_class: [source_ids, ...]}``; the
bundled ``data/tinyimagenet_cifar10.json`` maps TinyImageNet WNIDs onto the
ten CIFAR10 class names. Samples whose source id appears nowhere are dropped
(and counted), preserving the order of the retained samples.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


def bundled_mapping_path() -> Path:
    return Path(resources.files("pathsig_extract") / "data" / "tinyimagenet_cifar10.json")


def bundled_class_list_path() -> Path:
    return Path(resources.files("pathsig_extract") / "data" / "imagenet_sampled_classes.json")


def load_mapping(path) -> dict[str, list[str]]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"mapping file {path} must hold an object of target -> source ids")
    mapping = {}
    for target, sources in raw.items():
        if not isinstance(sources, list) or not all(isinstance(s, str) for s in sources):
            raise ValueError(f"mapping for {target!r} must be a list of source id strings")
        mapping[str(target)] = list(sources)
    return mapping


def load_class_list(path) -> list[str]:
    """Read a subset file: a JSON list of ids or of objects with a 'wnid' key."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list) or not raw:
        raise ValueError(f"subset file {path} must hold a non-empty JSON list")
    ids = []
    for entry in raw:
        if isinstance(entry, str):
            ids.append(entry)
        elif isinstance(entry, dict) and isinstance(entry.get("wnid"), str):
            ids.append(entry["wnid"])
        else:
            raise ValueError(f"subset entries must be strings or objects with 'wnid': {entry!r}")
    return ids


@dataclass
class MappedLabels:
    kept_indices: np.ndarray     # positions of retained samples, original order
    labels: np.ndarray           # remapped class indices for retained samples
    class_names: list[str]       # target classes, mapping-file order
    dropped: int


def map_labels(source_ids, mapping: dict[str, list[str]]) -> MappedLabels:
    """Map per-sample source ids onto target class indices.

    ``source_ids`` holds one id per sample (e.g. a WNID). A source id listed
    under two different targets is a configuration error.
    """
    source_to_target: dict[str, int] = {}
    targets = list(mapping)
    for t_idx, target in enumerate(targets):
        for source in mapping[target]:
            previous = source_to_target.get(source)
            if previous is not None and previous != t_idx:
                raise ValueError(
                    f"source id {source!r} is mapped to both "
                    f"{targets[previous]!r} and {target!r}"
                )
            source_to_target[source] = t_idx

    kept, labels = [], []
    dropped = 0
    for i, source in enumerate(source_ids):
        target = source_to_target.get(str(source))
        if target is None:
            dropped += 1
        else:
            kept.append(i)
            labels.append(target)
    return MappedLabels(
        kept_indices=np.asarray(kept, dtype=np.int64),
        labels=np.asarray(labels, dtype=np.int64),
        class_names=targets,
        dropped=dropped,
    )


def class_subset(manifest_path, id_list, out_dir) -> Path:
    """Restrict a dump to the listed classes, reindexed to the list's order.

    Writes a new self-contained dump plus a ``subset_provenance.json``
    sidecar; returns the new manifest path. Ids missing from the source
    manifest are an error.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    class_names = manifest["class_names"]
    unknown = [i for i in id_list if i not in class_names]
    if unknown:
        raise ValueError(f"ids not present in the manifest: {unknown}")
    if len(set(id_list)) != len(id_list):
        raise ValueError("subset list contains duplicates")

    base = manifest_path.parent
    labels = np.load(base / manifest["label_file"]).astype(np.int64)
    activations = np.load(base / manifest["activation_file"])

    old_to_new = {class_names.index(cid): new for new, cid in enumerate(id_list)}
    keep = np.asarray([i for i, lab in enumerate(labels) if int(lab) in old_to_new], dtype=np.int64)
    if keep.size == 0:
        raise ValueError("no samples left after subsetting")
    new_labels = np.asarray([old_to_new[int(labels[i])] for i in keep], dtype=np.int64)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dtype = np.float32 if manifest["dtype"] == "f32" else np.float64
    shutil.copyfile(base / manifest["weight_file"], out_dir / "weights.npy")
    if manifest.get("bias_file"):
        shutil.copyfile(base / manifest["bias_file"], out_dir / "bias.npy")
    np.save(out_dir / "activations.npy", activations[keep].astype(dtype))
    np.save(out_dir / "labels.npy", new_labels.astype(dtype))

    new_manifest = dict(manifest)
    new_manifest.update(
        {
            "weight_file": "weights.npy",
            "bias_file": "bias.npy" if manifest.get("bias_file") else None,
            "activation_file": "activations.npy",
            "label_file": "labels.npy",
            "class_names": list(id_list),
            "sample_count": int(keep.size),
        }
    )
    manifest_out = out_dir / "manifest.json"
    manifest_out.write_text(json.dumps(new_manifest, indent=2, sort_keys=True) + "\n")
    (out_dir / "subset_provenance.json").write_text(
        json.dumps(
            {
                "source_manifest": str(manifest_path),
                "id_list": list(id_list),
                "retained_samples": int(keep.size),
                "dropped_samples": int(labels.size - keep.size),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return manifest_out
