import numpy as np
import pytest
from hypothesis import settings

from pathsig import tensorio

settings.register_profile("suite", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("suite")


@pytest.fixture
def make_dump(tmp_path):
    """Factory writing a consistent dump to disk; returns the manifest path."""

    def _make(
        samples=10,
        features=4,
        outputs=3,
        classes=2,
        seed=0,
        subdir="dump",
        labels=None,
        with_bias=True,
        **overrides,
    ):
        rng = np.random.default_rng(seed)
        if labels is None:
            labels = rng.integers(0, classes, size=samples)
        kwargs = dict(
            weights=rng.standard_normal((outputs, features)),
            activations=rng.standard_normal((samples, features)),
            labels=labels,
            class_names=[f"class_{i}" for i in range(classes)],
            bias=rng.standard_normal(outputs) if with_bias else None,
            model_id="toy",
            layer_id="final",
        )
        kwargs.update(overrides)
        return tensorio.write_dump(tmp_path / subdir, **kwargs)

    return _make
