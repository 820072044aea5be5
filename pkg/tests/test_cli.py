import json

import pytest

from xrdmap.cli import main
from xrdmap.io import import_result, load_dataset, read_patterns

CONFIG = {
    "seed": 3,
    "phases": [
        {"peaks": [1.5, 2.5], "amplitudes": [400.0, 400.0], "sigma": 0.05},
        {"peaks": [3.0, 3.9], "amplitudes": [400.0, 400.0], "sigma": 0.05},
    ],
    "wafer_radius": 6.0,
    "pitch": 2.0,
    "n_points": 120,
    "window_count": 24,
    "separation_th": 2,
    "boundary_band": 0.1,
}


@pytest.fixture()
def workspace(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(CONFIG))
    return tmp_path, config_path


def run_pipeline(tmp_path, config_path):
    synth_dir = tmp_path / "synth"
    assert main(["synth", "--config", str(config_path), "--out", str(synth_dir)]) == 0
    dataset = synth_dir / "dataset.csv"
    patterns = tmp_path / "patterns.json"
    assert main([
        "binarize", "--in", str(dataset), "--windows", "24", "--out", str(patterns),
    ]) == 0
    result = tmp_path / "result.json"
    assert main([
        "map", "--in", str(patterns), "--th", "1", "--ot", "1", "--out", str(result),
    ]) == 0
    return synth_dir, dataset, patterns, result


class TestPipeline:
    def test_synth_outputs(self, workspace, capsys):
        tmp_path, config_path = workspace
        out_dir = tmp_path / "synth"
        assert main(["synth", "--config", str(config_path), "--out", str(out_dir)]) == 0
        assert (out_dir / "dataset.csv").exists()
        assert (out_dir / "truth.json").exists()
        assert json.loads((out_dir / "config.json").read_text())["seed"] == 3
        assert "samples" in capsys.readouterr().out

    def test_seed_override_changes_data(self, tmp_path):
        config_path = tmp_path / "noisy.json"
        config_path.write_text(json.dumps({**CONFIG, "noise_sigma": 4.0}))
        main(["synth", "--config", str(config_path), "--out", str(tmp_path / "a")])
        main(["synth", "--config", str(config_path), "--seed", "99", "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "dataset.csv").read_text()
        b = (tmp_path / "b" / "dataset.csv").read_text()
        assert a != b

    def test_binarize_then_map(self, workspace, capsys):
        tmp_path, config_path = workspace
        _, _, patterns_path, result_path = run_pipeline(tmp_path, config_path)
        patterns, meta = read_patterns(patterns_path)
        assert meta["threshold_mode"] == "auto"
        assert meta["window_count"] == 24
        assert len(patterns) > 0
        result = import_result(result_path)
        assert len(result.catalog) >= 2
        assert result.params["binarization"]["window_count"] == 24
        assert "pure phases" in capsys.readouterr().out

    def test_fixed_threshold_recorded(self, workspace):
        tmp_path, config_path = workspace
        synth_dir = tmp_path / "synth"
        main(["synth", "--config", str(config_path), "--out", str(synth_dir)])
        patterns = tmp_path / "patterns.json"
        assert main([
            "binarize", "--in", str(synth_dir / "dataset.csv"), "--windows", "24",
            "--threshold", "50", "--out", str(patterns),
        ]) == 0
        _, meta = read_patterns(patterns)
        assert meta["threshold_mode"] == "fixed"
        assert meta["intensity_threshold"] == 50.0

    def test_merge_by_ids(self, workspace, capsys):
        tmp_path, config_path = workspace
        *_, result_path = run_pipeline(tmp_path, config_path)
        before = import_result(result_path)
        merged_path = tmp_path / "merged.json"
        assert main([
            "merge", "--in", str(result_path), "--ids", "P0,P1",
            "--timestamp", "2026-01-01T00:00:00+00:00", "--out", str(merged_path),
        ]) == 0
        merged = import_result(merged_path)
        assert len(merged.catalog) == len(before.catalog) - 1
        assert merged.lineage[-1]["timestamp"] == "2026-01-01T00:00:00+00:00"
        assert "->" in capsys.readouterr().out

    def test_merge_by_cutoff(self, workspace):
        tmp_path, config_path = workspace
        *_, result_path = run_pipeline(tmp_path, config_path)
        merged_path = tmp_path / "merged.json"
        assert main([
            "merge", "--in", str(result_path), "--cutoff", "1e9", "--out", str(merged_path),
        ]) == 0
        assert len(import_result(merged_path).catalog) == 1

    def test_plot_files(self, workspace):
        tmp_path, config_path = workspace
        _, dataset, _, result_path = run_pipeline(tmp_path, config_path)
        plots = tmp_path / "plots"
        assert main([
            "plot", "--result", str(result_path), "--dataset", str(dataset),
            "--out", str(plots),
        ]) == 0
        for name in ("wafer.svg", "ternary.svg", "peaks.svg", "plot_data.json"):
            assert (plots / name).exists()

    def test_baseline_with_truth(self, workspace):
        tmp_path, config_path = workspace
        synth_dir, dataset, *_ = run_pipeline(tmp_path, config_path)
        report_path = tmp_path / "report.json"
        assert main([
            "baseline", "--in", str(dataset), "--method", "hier", "--param", "1000,10",
            "--truth", str(synth_dir / "truth.json"), "--out", str(report_path),
        ]) == 0
        report = json.loads(report_path.read_text())
        assert len(report["rows"]) == 2
        assert {"purity", "adjusted_rand_index"} <= set(report["rows"][0])
        assert "dtw" in report["omitted_methods"]

    def test_baseline_without_truth(self, workspace):
        tmp_path, config_path = workspace
        _, dataset, *_ = run_pipeline(tmp_path, config_path)
        report_path = tmp_path / "report.json"
        assert main([
            "baseline", "--in", str(dataset), "--method", "kmeans", "--param", "2",
            "--out", str(report_path),
        ]) == 0
        report = json.loads(report_path.read_text())
        assert report["rows"][0]["n_clusters"] == 2
        assert "purity" not in report["rows"][0]


class TestErrorHandling:
    def test_missing_input_is_io_error(self, tmp_path, capsys):
        assert main(["binarize", "--in", str(tmp_path / "nope.csv"), "--windows", "10"]) == 2
        assert "error" in capsys.readouterr().err

    def test_validation_error_exit_code(self, workspace, capsys):
        tmp_path, config_path = workspace
        *_, patterns_path, _ = run_pipeline(tmp_path, config_path)
        code = main(["map", "--in", str(patterns_path), "--th", "30", "--ot", "1",
                     "--out", str(tmp_path / "r.json")])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_bad_threshold_text(self, workspace, capsys):
        tmp_path, config_path = workspace
        synth_dir = tmp_path / "synth"
        main(["synth", "--config", str(config_path), "--out", str(synth_dir)])
        code = main(["binarize", "--in", str(synth_dir / "dataset.csv"),
                     "--windows", "24", "--threshold", "bogus"])
        assert code == 1
        capsys.readouterr()

    def test_merge_requires_mode(self, workspace, capsys):
        tmp_path, config_path = workspace
        *_, result_path = run_pipeline(tmp_path, config_path)
        assert main(["merge", "--in", str(result_path)]) == 1
        capsys.readouterr()

    def test_kmeans_requires_param(self, workspace, capsys):
        tmp_path, config_path = workspace
        _, dataset, *_ = run_pipeline(tmp_path, config_path)
        assert main(["baseline", "--in", str(dataset), "--method", "kmeans"]) == 1
        capsys.readouterr()

    def test_errors_json_flag(self, workspace, capsys):
        tmp_path, config_path = workspace
        *_, patterns_path, _ = run_pipeline(tmp_path, config_path)
        code = main(["--errors-json", "map", "--in", str(patterns_path), "--th", "30",
                     "--ot", "1", "--out", str(tmp_path / "r.json")])
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ParameterError"
        assert err["message"]

    def test_corrupt_json_is_io_error(self, tmp_path, capsys):
        bad = tmp_path / "patterns.json"
        bad.write_text("{not json")
        assert main(["map", "--in", str(bad), "--th", "1", "--ot", "1",
                     "--out", str(tmp_path / "r.json")]) == 2
        capsys.readouterr()


class TestOutDirEnv:
    def test_default_out_dir(self, workspace, monkeypatch):
        tmp_path, config_path = workspace
        synth_dir = tmp_path / "synth"
        main(["synth", "--config", str(config_path), "--out", str(synth_dir)])
        target = tmp_path / "envout"
        target.mkdir()
        monkeypatch.setenv("XRDMAP_OUT_DIR", str(target))
        assert main(["binarize", "--in", str(synth_dir / "dataset.csv"), "--windows", "24"]) == 0
        assert (target / "patterns.json").exists()
