import csv
import json

import numpy as np
import pytest

from pathsig import load_dump
from pathsig.report import (
    RunConfig,
    render_ppm,
    run_analyze,
    run_compare,
    sha256_file,
    write_matrix_csv,
)


def bundle_hashes(root):
    return {
        p.relative_to(root).as_posix(): sha256_file(p)
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestRenderPpm:
    def test_header_and_value_mapping(self):
        data = render_ppm([[0.0, 1.0]], lo=0.0, hi=1.0, cell=1)
        assert data.startswith(b"P6\n2 1\n255\n")
        pixels = data[len(b"P6\n2 1\n255\n") :]
        assert pixels == bytes([0, 0, 0, 255, 255, 255])

    def test_midpoint_rounds(self):
        data = render_ppm([[0.5]], lo=0.0, hi=1.0, cell=1)
        value = data[-1]
        assert value == round(255 * 0.5)

    def test_degenerate_range_is_black(self):
        data = render_ppm([[3.0, 3.0]], lo=3.0, hi=3.0, cell=1)
        assert data[-6:] == bytes(6)

    def test_cell_expansion(self):
        data = render_ppm([[1.0]], lo=0.0, hi=1.0, cell=4)
        assert data.startswith(b"P6\n4 4\n255\n")
        assert len(data) == len(b"P6\n4 4\n255\n") + 4 * 4 * 3


class TestRunConfig:
    def test_metric_all_expands(self):
        cfg = RunConfig(inputs=["x"], metrics=["all"])
        assert set(cfg.metrics) == {"path-kl", "prototype-kl", "softmax-kl", "energy"}

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError, match="unknown metrics"):
            RunConfig(inputs=["x"], metrics=["bogus"])

    def test_bad_alpha_and_bins(self):
        with pytest.raises(ValueError):
            RunConfig(inputs=["x"], alpha=-1)
        with pytest.raises(ValueError):
            RunConfig(inputs=["x"], bins=0)


class TestRunAnalyze:
    def test_bundle_files_and_summary_schema(self, make_dump, tmp_path):
        manifest = make_dump(samples=20, classes=2, seed=40)
        cfg = RunConfig(
            inputs=[str(manifest)],
            out_dir=str(tmp_path / "out"),
            metrics=["all"],
        )
        analyses = run_analyze(cfg)
        (name,) = analyses
        run_dir = tmp_path / "out" / name
        for fname in (
            "kl_matrix.csv",
            "kl_matrix.json",
            "kl_heatmap.ppm",
            "kl_heatmap_unnormalised.ppm",
            "summary.json",
            "metrics.json",
        ):
            assert (run_dir / fname).exists(), fname
        assert (tmp_path / "out" / "index.json").exists()

        summary = json.loads((run_dir / "summary.json").read_text())
        assert "mean_inter_class_kl" in summary
        assert "mean_class_entropy" in summary
        assert summary["threshold_mode"] == "literal"
        assert summary["alpha"] == 0.5

        metrics = json.loads((run_dir / "metrics.json").read_text())
        assert set(metrics) == {"path-kl", "prototype-kl", "softmax-kl", "energy"}

        hists = sorted((run_dir / "histograms").glob("*.csv"))
        assert len(hists) == 2
        with open(hists[0]) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bin_lo", "bin_hi", "count"]
        assert sum(int(r[2]) for r in rows[1:]) == 12  # 3x4 paths

    def test_rerun_is_byte_identical(self, make_dump, tmp_path):
        manifest = make_dump(samples=15, seed=41)
        cfg_a = RunConfig(inputs=[str(manifest)], out_dir=str(tmp_path / "a"), metrics=["all"])
        cfg_b = RunConfig(inputs=[str(manifest)], out_dir=str(tmp_path / "b"), metrics=["all"])
        run_analyze(cfg_a)
        run_analyze(cfg_b)
        a, b = bundle_hashes(tmp_path / "a"), bundle_hashes(tmp_path / "b")
        assert a == b

    def test_shared_scale_across_three_dumps(self, make_dump, tmp_path):
        manifests = [
            make_dump(samples=12, seed=s, subdir=f"d{s}", model_id=f"m{s}")
            for s in (1, 2, 3)
        ]
        cfg = RunConfig(
            inputs=[str(m) for m in manifests], out_dir=str(tmp_path / "shared")
        )
        analyses = run_analyze(cfg)
        summaries = [
            json.loads((tmp_path / "shared" / name / "summary.json").read_text())
            for name in analyses
        ]
        scales = [(s["heatmap_scale"]["lo"], s["heatmap_scale"]["hi"]) for s in summaries]
        assert len(set(scales)) == 1
        lo = min(a.matrix.kl.min() for a in analyses.values())
        hi = max(a.matrix.kl.max() for a in analyses.values())
        assert scales[0] == (pytest.approx(lo), pytest.approx(hi))

    def test_per_matrix_scale_when_not_shared(self, make_dump, tmp_path):
        manifests = [
            make_dump(samples=12, seed=s, subdir=f"e{s}", model_id=f"m{s}")
            for s in (4, 5)
        ]
        cfg = RunConfig(
            inputs=[str(m) for m in manifests],
            out_dir=str(tmp_path / "own"),
            shared_scale=False,
        )
        analyses = run_analyze(cfg)
        for name, analysis in analyses.items():
            summary = json.loads((tmp_path / "own" / name / "summary.json").read_text())
            assert summary["heatmap_scale"]["lo"] == pytest.approx(analysis.matrix.kl.min())
            assert summary["heatmap_scale"]["hi"] == pytest.approx(analysis.matrix.kl.max())

    def test_layer_filter(self, make_dump, tmp_path):
        first = make_dump(samples=6, seed=6, subdir="lf", layer_id="final")
        second = make_dump(samples=6, seed=7, subdir="ls", layer_id="second_last")
        cfg = RunConfig(
            inputs=[str(first), str(second)],
            out_dir=str(tmp_path / "fl"),
            layer="second_last",
        )
        analyses = run_analyze(cfg)
        assert list(analyses) == ["toy__second_last"]

    def test_layer_filter_no_match(self, make_dump, tmp_path):
        manifest = make_dump(samples=6, seed=8, subdir="lq")
        cfg = RunConfig(inputs=[str(manifest)], out_dir=str(tmp_path / "nm"), layer="zzz")
        with pytest.raises(Exception, match="layer_id"):
            run_analyze(cfg)

    def test_export_masks_flag(self, make_dump, tmp_path):
        manifest = make_dump(samples=4, seed=9, subdir="masks")
        cfg = RunConfig(
            inputs=[str(manifest)], out_dir=str(tmp_path / "mk"), export_masks=True
        )
        (name,) = run_analyze(cfg)
        files = sorted((tmp_path / "mk" / name / "masks").glob("*.npy"))
        assert len(files) == 4
        from pathsig.tensorio import read_array

        mask = read_array(files[0])
        assert mask.dtype == np.float32
        assert set(np.unique(mask)) <= {0.0, 1.0}

    def test_index_hashes_are_correct(self, make_dump, tmp_path):
        manifest = make_dump(samples=5, seed=10, subdir="idx")
        cfg = RunConfig(inputs=[str(manifest)], out_dir=str(tmp_path / "ix"))
        run_analyze(cfg)
        index = json.loads((tmp_path / "ix" / "index.json").read_text())
        assert index["files"]
        for rel, digest in index["files"].items():
            assert sha256_file(tmp_path / "ix" / rel) == digest

    def test_empty_class_skipped_and_recorded(self, make_dump, tmp_path):
        labels = np.array([0, 0, 2, 2, 0])
        manifest = make_dump(
            samples=5, classes=3, labels=labels, subdir="skip", seed=11
        )
        cfg = RunConfig(inputs=[str(manifest)], out_dir=str(tmp_path / "sk"))
        (name,) = run_analyze(cfg)
        summary = json.loads((tmp_path / "sk" / name / "summary.json").read_text())
        assert summary["skipped_empty_classes"] == ["class_1"]
        assert summary["num_classes"] == 2


class TestRunCompare:
    def test_identical_dumps_zero_vector(self, make_dump, tmp_path):
        manifest = make_dump(samples=10, seed=50, subdir="cmp")
        cfg = RunConfig(out_dir=str(tmp_path / "cmp_out"))
        summary = run_compare(cfg, manifest, manifest)
        assert summary["mean_id_ood_distance"] == pytest.approx(0.0, abs=1e-15)
        assert summary["delta_ood_minus_id"]["mean_inter_class_kl"] == pytest.approx(0.0)
        assert (tmp_path / "cmp_out" / "id_ood_cross.csv").exists()
        assert (tmp_path / "cmp_out" / "compare_summary.json").exists()

    def test_disjoint_classes_error(self, make_dump, tmp_path):
        id_manifest = make_dump(samples=6, seed=51, subdir="cid")
        ood_manifest = make_dump(
            samples=6, seed=52, subdir="cood", class_names=["x", "y"]
        )
        cfg = RunConfig(out_dir=str(tmp_path / "dj"))
        with pytest.raises(ValueError, match="share no classes"):
            run_compare(cfg, id_manifest, ood_manifest)


class TestCsvWriter:
    def test_matrix_csv_round_trips(self, tmp_path):
        labels = ["a", "b"]
        matrix = np.array([[0.125, 2.5], [float(np.pi), 0.0]])
        path = write_matrix_csv(tmp_path / "m.csv", labels, matrix)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["", "a", "b"]
        back = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
        assert np.array_equal(back, matrix)
