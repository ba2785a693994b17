import json

import numpy as np
import pytest
import torch
from torch import nn


@pytest.fixture
def toy_checkpoint(tmp_path):
    """A small two-linear-layer network saved as a full module."""
    torch.manual_seed(0)
    model = nn.Sequential(
        nn.Linear(6, 5),
        nn.ReLU(),
        nn.Linear(5, 3),
    )
    path = tmp_path / "toy_model.pt"
    torch.save(model, path)
    return path


@pytest.fixture
def tensor_dataset(tmp_path):
    """Dataset directory: inputs.npy + labels.npy + class_names.json."""

    def _make(samples=10, features=6, class_names=("a", "b", "c"), seed=1,
              subdir="data", labels=None, with_labels=True):
        rng = np.random.default_rng(seed)
        root = tmp_path / subdir
        root.mkdir(parents=True, exist_ok=True)
        np.save(root / "inputs.npy", rng.standard_normal((samples, features)).astype(np.float32))
        if with_labels:
            if labels is None:
                labels = rng.integers(0, len(class_names), size=samples)
            np.save(root / "labels.npy", np.asarray(labels, dtype=np.int64))
            (root / "class_names.json").write_text(json.dumps(list(class_names)))
        return root

    return _make
