"""End-to-end tests of the command-line client on a small synthetic scene."""

import json

import numpy as np
import pytest

from clients.cli import main, sibling_paths
from db.model_store import load_model
from db.patch_store import load_patches
from db.records import read_epochs
from models.fusion_models import FrameTiming
from services.dataset import read_gray


@pytest.fixture
def dataset(tmp_path, small_scene_text):
    spec = tmp_path / "scene.txt"
    spec.write_text(small_scene_text)
    out = tmp_path / "scene"
    assert main(["synth", "--spec", str(spec), "--out", str(out)]) == 0
    return out


@pytest.fixture
def caches(tmp_path, dataset):
    train_cache = tmp_path / "cache" / "train.npz"
    assert main(["extract", "--dataset", str(dataset), "--out", str(train_cache), "--stride", "8"]) == 0
    return train_cache


class TestSynthAndLabels:
    def test_synth_layout(self, dataset):
        for name in ("rgb", "depth", "labels", "appearance"):
            assert len(list((dataset / name).glob("*.png"))) == 4
        assert (dataset / "rgb.txt").is_file() and (dataset / "depth.txt").is_file()
        assert json.loads((dataset / "run_config.json").read_text())["command"] == "synth"

    def test_label_gen_matches_rendered_labels(self, tmp_path, dataset):
        out = tmp_path / "labels"
        assert main(["label-gen", "--dataset", str(dataset), "--out", str(out)]) == 0
        generated = sorted(out.glob("*.png"))
        assert [p.name for p in generated] == sorted(p.name for p in (dataset / "labels").glob("*.png"))
        for path in generated:
            np.testing.assert_array_equal(read_gray(path), read_gray(dataset / "labels" / path.name))

    def test_label_gen_is_repeatable(self, tmp_path, dataset):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["label-gen", "--dataset", str(dataset), "--out", str(first), "--threads", "3"]) == 0
        assert main(["label-gen", "--dataset", str(dataset), "--out", str(second), "--deterministic"]) == 0
        for path in sorted(first.glob("*.png")):
            assert path.read_bytes() == (second / path.name).read_bytes()


class TestPipeline:
    def test_extract_outputs(self, caches):
        siblings = sibling_paths(caches)
        train_patches = load_patches(caches)
        test_patches = load_patches(siblings["test"])
        assert train_patches.channels == 4 and len(train_patches) > 0 and len(test_patches) > 0
        assert set(np.unique(train_patches.frame_ids)) <= {0, 1, 2}
        assert set(np.unique(test_patches.frame_ids)) == {3}
        stats = json.loads(siblings["stats"].read_text())
        assert stats["channels"] == 4 and stats["patch_count"] == len(train_patches)

    def test_train_eval_infer_plot(self, tmp_path, dataset, caches, capsys):
        siblings = sibling_paths(caches)
        run = tmp_path / "run"
        assert main(["train", "--patches", str(caches), "--test-patches", str(siblings["test"]),
                     "--out", str(run), "--epochs", "1", "--batch-size", "32", "--deterministic"]) == 0
        assert load_model(run / "model.ocnn").channels == 4
        assert [r.epoch for r in read_epochs(run / "epochs.csv")] == [1]
        assert (run / "stats.json").is_file()

        report = tmp_path / "report"
        assert main(["eval", "--model", str(run / "model.ocnn"), "--patches", str(siblings["test"]),
                     "--out", str(report)]) == 0
        assert "RGB-D" in capsys.readouterr().out
        assert (report / "report.txt").is_file() and (report / "report.csv").is_file()

        heat = tmp_path / "heat"
        assert main(["infer", "--model", str(run / "model.ocnn"), "--stats", str(run / "stats.json"),
                     "--dataset", str(dataset), "--out", str(heat), "--stride", "8", "16",
                     "--frames", "0", "--threshold", "0.5"]) == 0
        timings = [FrameTiming.model_validate_json(line) for line in (heat / "timing.jsonl").read_text().splitlines()]
        assert [(t.frame_id, t.stride) for t in timings] == [(0, 8), (0, 16)]
        assert [t.patch_count for t in timings] == [45, 15]
        for name in ("heatmap_0000_s8.png", "heatmap_0000_s8_color.png", "mask_0000_s16.png"):
            assert (heat / name).is_file()
        assert read_gray(heat / "heatmap_0000_s16.png").shape == (64, 96)

        pytest.importorskip("matplotlib")
        assert main(["plot", "--epochs-csv", str(run / "epochs.csv"), "--out", str(tmp_path / "curves.png")]) == 0
        assert (tmp_path / "curves.png").is_file()

    def test_deterministic_training_is_bit_identical(self, tmp_path, caches):
        test_cache = sibling_paths(caches)["test"]
        outputs = []
        for name in ("first", "second"):
            out = tmp_path / name
            assert main(["train", "--patches", str(caches), "--test-patches", str(test_cache), "--out", str(out),
                         "--epochs", "2", "--batch-size", "16", "--seed", "11", "--deterministic"]) == 0
            outputs.append((out / "model.ocnn").read_bytes())
        assert outputs[0] == outputs[1]

    def test_deterministic_inference_is_byte_identical(self, tmp_path, dataset, caches):
        run = tmp_path / "run"
        assert main(["train", "--patches", str(caches), "--test-patches", str(sibling_paths(caches)["test"]),
                     "--out", str(run), "--epochs", "1", "--batch-size", "16"]) == 0
        outputs = []
        for name in ("first", "second"):
            heat = tmp_path / name
            assert main(["infer", "--model", str(run / "model.ocnn"), "--stats", str(run / "stats.json"),
                         "--dataset", str(dataset), "--out", str(heat), "--stride", "8", "--frames", "0,3",
                         "--seed", "3", "--deterministic", "--threads", "4"]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(heat.glob("*.png"))})
        assert len(outputs[0]) >= 2
        assert outputs[0] == outputs[1]

    def test_rgb_model_from_rgbd_cache(self, tmp_path, caches):
        out = tmp_path / "rgb"
        assert main(["train", "--patches", str(caches), "--test-patches", str(sibling_paths(caches)["test"]),
                     "--out", str(out), "--epochs", "0", "--channels", "rgb"]) == 0
        assert load_model(out / "model.ocnn").channels == 3
        assert json.loads((out / "stats.json").read_text())["channels"] == 3


class TestConfiguration:
    def test_config_file_and_flag_precedence(self, tmp_path, caches):
        config = tmp_path / "run.conf"
        config.write_text("seed = 5\ntrain.epochs = 0\ntrain.lr = 0.05\ntrain.batch_size = 8\n")
        out = tmp_path / "run"
        assert main(["train", "--config", str(config), "--patches", str(caches),
                     "--test-patches", str(sibling_paths(caches)["test"]), "--out", str(out), "--lr", "0.02"]) == 0
        saved = json.loads((out / "run_config.json").read_text())
        assert saved["seed"] == 5
        assert saved["train"]["lr"] == 0.02
        assert saved["train"]["batch_size"] == 8
        assert saved["train"]["momentum"] == 0.9
        assert saved["train"]["shuffle_seed"] == 5

    def test_subsample_flags_reach_the_train_section(self, tmp_path, caches):
        out = tmp_path / "run"
        assert main(["train", "--patches", str(caches), "--test-patches", str(sibling_paths(caches)["test"]),
                     "--out", str(out), "--epochs", "1", "--train-subsample", "5", "--test-subsample", "4"]) == 0
        saved = json.loads((out / "run_config.json").read_text())
        assert (saved["train"]["train_subsample"], saved["train"]["test_subsample"]) == (5, 4)
        errors = [(r.train_error * 5, r.test_error * 4) for r in read_epochs(out / "epochs.csv")]
        assert all(abs(a - round(a)) < 1e-9 and abs(b - round(b)) < 1e-9 for a, b in errors)


class TestExitCodes:
    def test_missing_model(self, tmp_path, caches, capsys):
        code = main(["eval", "--model", str(tmp_path / "nowhere" / "model.ocnn"), "--patches", str(caches),
                     "--out", str(tmp_path / "report")])
        assert code == 2
        assert "model file not found" in capsys.readouterr().err

    def test_bad_scene_spec(self, tmp_path, capsys):
        spec = tmp_path / "bad.txt"
        spec.write_text("size 64 64\nbox 1 2 3\n")
        assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "out")]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert main(["train", "--no-such-flag"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_dataset(self, tmp_path):
        assert main(["label-gen", "--dataset", str(tmp_path / "absent"), "--out", str(tmp_path / "out")]) == 2

    def test_invalid_value(self, tmp_path, caches):
        code = main(["train", "--patches", str(caches), "--test-patches", str(caches), "--out", str(tmp_path / "r"),
                     "--lr", "-1"])
        assert code == 1
