import json

import numpy as np
import pytest
import torch
from torch import nn

from pathsig.mlp import LayerSpec, forward_batch
from pathsig.tensorio import load_dump

from pathsig_extract import ExtractionJob, extract, resolve_model, select_linear
from pathsig_extract.cli import main as extract_main


class TestExtract:
    def test_sample_cap(self, toy_checkpoint, tensor_dataset, tmp_path):
        data = tensor_dataset(samples=25)
        job = ExtractionJob(
            model=str(toy_checkpoint),
            data_root=str(data),
            out_dir=str(tmp_path / "capped"),
            cap=10,
        )
        manifest = extract(job)
        dump = load_dump(manifest)
        assert dump.sample_count == 10
        assert dump.activations.shape == (10, 5)

    def test_acceptance_strict_validation_and_cross_engine_consistency(
        self, toy_checkpoint, tensor_dataset, tmp_path
    ):
        # the two-part secondary gate: the manifest passes strict validation,
        # and the dense engine's forward pass on the dumped arrays reproduces
        # the pre-activations torch captured during extraction
        data = tensor_dataset(samples=10)
        job = ExtractionJob(
            model=str(toy_checkpoint),
            data_root=str(data),
            out_dir=str(tmp_path / "accept"),
            cap=10,
            capture_preactivations=True,
        )
        manifest = extract(job)
        dump = load_dump(manifest, strict=True)

        layer = LayerSpec(dump.weights, dump.bias, "identity")
        recomputed = forward_batch([layer], dump.activations)[0][0]
        captured = np.load(manifest.parent / "preactivations.npy").astype(np.float64)
        assert np.max(np.abs(recomputed - captured)) <= 1e-5
        print("\nACCEPTANCE PASS: extractor dump is strict-valid and engine-consistent")

    def test_second_last_layer_captures_raw_inputs(
        self, toy_checkpoint, tensor_dataset, tmp_path
    ):
        data = tensor_dataset(samples=8, subdir="sl")
        job = ExtractionJob(
            model=str(toy_checkpoint),
            data_root=str(data),
            out_dir=str(tmp_path / "sl_out"),
            layer="second_last",
        )
        dump = load_dump(extract(job))
        assert dump.layer_id == "second_last"
        assert dump.weights.shape == (5, 6)
        inputs = np.load(data / "inputs.npy").astype(np.float64)
        assert np.allclose(dump.activations, inputs, atol=1e-6)

    def test_final_layer_activations_are_relu_outputs(
        self, toy_checkpoint, tensor_dataset, tmp_path
    ):
        data = tensor_dataset(samples=8, subdir="fl")
        job = ExtractionJob(
            model=str(toy_checkpoint), data_root=str(data), out_dir=str(tmp_path / "fl_out")
        )
        dump = load_dump(extract(job))
        assert dump.weights.shape == (3, 5)
        assert dump.activations.min() >= 0.0  # post-ReLU inputs to the head

    def test_label_free_mode(self, toy_checkpoint, tensor_dataset, tmp_path):
        data = tensor_dataset(samples=6, subdir="lf", with_labels=False)
        job = ExtractionJob(
            model=str(toy_checkpoint),
            data_root=str(data),
            out_dir=str(tmp_path / "lf_out"),
            label_free=True,
        )
        dump = load_dump(extract(job))
        assert dump.class_names == ["all"]
        assert set(dump.labels.tolist()) == {0}

    def test_mapping_drops_and_remaps(self, toy_checkpoint, tensor_dataset, tmp_path):
        mapping_file = tmp_path / "map.json"
        mapping_file.write_text(json.dumps({"first": ["a"], "second": ["b"]}))
        labels = np.array([0, 1, 2, 0, 2, 1])  # class "c" has no mapping
        data = tensor_dataset(samples=6, subdir="map", labels=labels)
        job = ExtractionJob(
            model=str(toy_checkpoint),
            data_root=str(data),
            out_dir=str(tmp_path / "map_out"),
            mapping_file=str(mapping_file),
        )
        manifest = extract(job)
        dump = load_dump(manifest)
        assert dump.class_names == ["first", "second"]
        assert dump.sample_count == 4
        assert np.array_equal(dump.labels, [0, 1, 0, 1])
        report = json.loads((manifest.parent / "extraction_report.json").read_text())
        assert report["dropped_unmapped"] == 2

    def test_split_subdirectory(self, toy_checkpoint, tensor_dataset, tmp_path):
        tensor_dataset(samples=4, subdir="root/val")
        job = ExtractionJob(
            model=str(toy_checkpoint),
            data_root=str(tmp_path / "root"),
            out_dir=str(tmp_path / "split_out"),
            split="val",
        )
        assert load_dump(extract(job)).sample_count == 4

    def test_f64_dump(self, toy_checkpoint, tensor_dataset, tmp_path):
        data = tensor_dataset(samples=5, subdir="f64")
        job = ExtractionJob(
            model=str(toy_checkpoint),
            data_root=str(data),
            out_dir=str(tmp_path / "f64_out"),
            dtype="f64",
        )
        assert load_dump(extract(job)).dtype == "f64"

    def test_missing_dataset_errors(self, toy_checkpoint, tmp_path):
        job = ExtractionJob(
            model=str(toy_checkpoint),
            data_root=str(tmp_path / "nowhere"),
            out_dir=str(tmp_path / "x"),
        )
        with pytest.raises(ValueError, match="inputs.npy"):
            extract(job)

    def test_bad_job_configs(self, toy_checkpoint):
        with pytest.raises(ValueError, match="layer"):
            ExtractionJob(model=str(toy_checkpoint), data_root="d", out_dir="o", layer="third")
        with pytest.raises(ValueError, match="cap"):
            ExtractionJob(model=str(toy_checkpoint), data_root="d", out_dir="o", cap=0)
        with pytest.raises(ValueError, match="label-free"):
            ExtractionJob(
                model=str(toy_checkpoint), data_root="d", out_dir="o",
                label_free=True, mapping_file="m.json",
            )


class TestAnalyzePipeline:
    def test_extracted_dump_flows_through_pathsig_analyze(
        self, toy_checkpoint, tensor_dataset, tmp_path
    ):
        from pathsig.cli import main as pathsig_main

        data = tensor_dataset(samples=30, subdir="flow", seed=9)
        manifest = extract(
            ExtractionJob(
                model=str(toy_checkpoint),
                data_root=str(data),
                out_dir=str(tmp_path / "flow_dump"),
            )
        )
        out = tmp_path / "flow_analysis"
        code = pathsig_main(
            ["analyze", "--inputs", str(manifest), "--out", str(out), "--metrics", "all"]
        )
        assert code == 0
        summary = json.loads(next(out.glob("*/summary.json")).read_text())
        assert summary["mean_inter_class_kl"] is not None
        assert summary["layer_id"] == "final"


class TestModelResolution:
    def test_state_dict_rejected(self, tmp_path):
        model = nn.Linear(3, 2)
        path = tmp_path / "sd.pt"
        torch.save(model.state_dict(), path)
        with pytest.raises(ValueError, match="state dict"):
            resolve_model(str(path))

    def test_torchscript_rejected_with_clear_message(self, tmp_path):
        # ScriptModules cannot take the activation hooks extraction relies on
        torch.manual_seed(1)
        model = torch.jit.script(nn.Sequential(nn.Linear(6, 4), nn.ReLU(), nn.Linear(4, 2)))
        path = tmp_path / "scripted.pt"
        torch.jit.save(model, path)
        with pytest.warns(UserWarning, match="TorchScript archive"):
            with pytest.raises(ValueError, match="TorchScript"):
                resolve_model(str(path))

    def test_unknown_name_errors(self):
        with pytest.raises(ValueError, match="cannot resolve"):
            resolve_model("definitely_not_a_model")

    def test_select_linear_requires_two_for_second_last(self):
        single = nn.Sequential(nn.Linear(4, 2))
        assert select_linear(single, "final") is single[0]
        with pytest.raises(ValueError, match="second-to-last"):
            select_linear(single, "second_last")

    def test_no_linear_layers(self):
        with pytest.raises(ValueError, match="fully-connected"):
            select_linear(nn.Sequential(nn.ReLU()), "final")


class TestExtractCli:
    def test_end_to_end(self, toy_checkpoint, tensor_dataset, tmp_path, capsys):
        data = tensor_dataset(samples=7, subdir="cli")
        out = tmp_path / "cli_out"
        code = extract_main(
            ["--model", str(toy_checkpoint), "--data", str(data), "--out", str(out), "--cap", "5"]
        )
        assert code == 0
        assert load_dump(out / "manifest.json").sample_count == 5

    def test_usage_error(self):
        assert extract_main(["--model", "x"]) == 1

    def test_data_error(self, toy_checkpoint, tmp_path):
        code = extract_main(
            ["--model", str(toy_checkpoint), "--data", str(tmp_path / "none"),
             "--out", str(tmp_path / "o")]
        )
        assert code == 2

    def test_subset_flag(self, toy_checkpoint, tensor_dataset, tmp_path):
        data = tensor_dataset(samples=12, subdir="sub", seed=5)
        subset_file = tmp_path / "subset.json"
        subset_file.write_text(json.dumps(["b"]))
        out = tmp_path / "sub_out"
        code = extract_main(
            ["--model", str(toy_checkpoint), "--data", str(data), "--out", str(out),
             "--subset", str(subset_file)]
        )
        assert code == 0
        dump = load_dump(out / "subset" / "manifest.json")
        assert dump.class_names == ["b"]
        assert set(dump.labels.tolist()) == {0}
