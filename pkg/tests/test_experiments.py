import numpy as np
import pytest

from pathsig import mlp
from pathsig.class_stats import fit_class_models
from pathsig.experiments import MemorisationConfig, run_memorisation, train_conditions
from pathsig.report import sha256_file
from pathsig.sparsity import path_frequencies, tail_mass
from pathsig.tensorio import load_dump


@pytest.fixture(scope="module")
def desk_scale_run(tmp_path_factory):
    cfg = MemorisationConfig(seed=0)
    data, models = train_conditions(cfg)
    root = tmp_path_factory.mktemp("conditions")
    dumps = {}
    for condition, (layers, _) in models.items():
        manifest = mlp.export_dump(layers, data, root / condition)
        dumps[condition] = load_dump(manifest)
    return dumps


class TestTrainConditions:
    def test_trained_model_grows_heavy_tail(self, desk_scale_run):
        # near-always-significant paths appear once real structure is learned
        def mean_tail(dump):
            per_class, _ = fit_class_models(dump)
            return float(
                np.mean(
                    [
                        tail_mass(path_frequencies(m), 0.9)
                        for m in per_class.values()
                        if m.sample_count
                    ]
                )
            )

        assert mean_tail(desk_scale_run["normal_labels"]) > mean_tail(
            desk_scale_run["untrained"]
        )

    def test_conditions_share_evaluation_data(self, desk_scale_run):
        untrained = desk_scale_run["untrained"]
        trained = desk_scale_run["normal_labels"]
        assert np.array_equal(untrained.labels, trained.labels)
        # same eval inputs feed every condition, only the layer differs
        assert untrained.activations.shape[0] == trained.activations.shape[0]


class TestRunMemorisation:
    def tiny_config(self, out_dir, seed=1):
        return MemorisationConfig(
            out_dir=str(out_dir),
            seed=seed,
            per_class=10,
            epochs=2,
            batch_size=5,
            ood_shift_sigmas=2.0,
        )

    def test_rerun_is_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            run_memorisation(self.tiny_config(tmp_path / name))
        hashes = []
        for name in ("a", "b"):
            root = tmp_path / name
            hashes.append(
                {
                    p.relative_to(root).as_posix(): sha256_file(p)
                    for p in sorted(root.rglob("*"))
                    if p.is_file()
                }
            )
        assert hashes[0] == hashes[1]

    def test_ood_section_schema(self, tmp_path):
        summary = run_memorisation(self.tiny_config(tmp_path / "ood"))
        ood = summary["ood"]
        for key in (
            "id_mean_inter_class_kl",
            "ood_mean_inter_class_kl",
            "id_mean_class_entropy",
            "ood_mean_class_entropy",
            "delta_ood_minus_id",
            "mean_id_ood_distance",
        ):
            assert key in ood
        assert (tmp_path / "ood" / "ood_compare" / "compare_summary.json").exists()
        assert (tmp_path / "ood" / "dumps" / "ood_shifted" / "manifest.json").exists()
