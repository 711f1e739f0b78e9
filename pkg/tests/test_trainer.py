"""Tests for the SGD trainer and patch classification helpers."""

import numpy as np
import pytest

from db.records import read_epochs
from models.config_models import TrainConfig
from models.frame_models import PatchLabel
from models.network_models import InitSchedule
from services.dataset import compute_stats, extract_sequence, normalize, random_scene, synth_sequence
from services.network import init_model
from services.training import classify, classify_batch, error_rate, predict_labels, train
from utils.errors import ConfigError, DataError, ShapeError
from utils.parallel import SEQUENTIAL

FAST = TrainConfig(epochs=2, batch_size=8, lr=0.01)


def trainable_model(seed: int = 0, channels: int = 4):
    schedule = InitSchedule(conv_stds=(0.1, 0.1, 0.1), output_std=0.3)
    return init_model(channels, schedule=schedule, rng_seed=seed, filters=(4, 4, 8))


class TestTrain:
    def test_zero_epochs_returns_initial_model(self, patch_factory):
        model = trainable_model()
        before = model.copy()
        trained, records = train(model, patch_factory(4, frame_id=0), patch_factory(4, frame_id=1),
                                 TrainConfig(epochs=0), execution=SEQUENTIAL)
        assert records == []
        for name, value in before.params.items():
            np.testing.assert_array_equal(trained.params[name], value)

    def test_records_per_epoch(self, patch_factory, tmp_path):
        csv_path = tmp_path / "epochs.csv"
        _, records = train(trainable_model(), patch_factory(20, frame_id=0), patch_factory(10, frame_id=1, seed=1),
                           FAST, execution=SEQUENTIAL, epochs_csv=csv_path)
        assert [r.epoch for r in records] == [1, 2]
        assert all(0.0 <= r.train_error <= 1.0 and 0.0 <= r.test_error <= 1.0 for r in records)
        assert all(r.mean_loss > 0 for r in records)
        assert [r.epoch for r in read_epochs(csv_path)] == [1, 2]

    def test_memorizes_two_patches(self, patch_factory):
        patches = patch_factory(2, positives=1, seed=5)
        held_out = patch_factory(2, positives=1, frame_id=1, seed=6)
        cfg = TrainConfig(epochs=300, batch_size=2, lr=0.01, momentum=0.9, l2=0.0)
        model, records = train(trainable_model(1), patches, held_out, cfg, execution=SEQUENTIAL)
        assert records[-1].train_error == 0.0
        assert error_rate(model, patches, SEQUENTIAL) == 0.0

    def test_fixed_seed_is_reproducible(self, patch_factory):
        train_set, test_set = patch_factory(24, frame_id=0), patch_factory(8, frame_id=1, seed=2)
        cfg = FAST.updated(shuffle_seed=4)
        model_a, records_a = train(trainable_model(2), train_set, test_set, cfg, execution=SEQUENTIAL)
        model_b, records_b = train(trainable_model(2), train_set, test_set, cfg, execution=SEQUENTIAL)
        for name in model_a.params:
            np.testing.assert_array_equal(model_a.params[name], model_b.params[name])
        assert [(r.train_error, r.test_error, r.mean_loss) for r in records_a] == \
               [(r.train_error, r.test_error, r.mean_loss) for r in records_b]

    def test_shared_frames_rejected(self, patch_factory):
        with pytest.raises(DataError, match="share frames"):
            train(trainable_model(), patch_factory(4, frame_id=3), patch_factory(4, frame_id=3), FAST)

    def test_empty_split_rejected(self, patch_factory):
        with pytest.raises(DataError):
            train(trainable_model(), patch_factory(0), patch_factory(4, frame_id=1), FAST)

    def test_channel_mismatch_is_config_error(self, patch_factory):
        with pytest.raises(ConfigError):
            train(trainable_model(channels=3), patch_factory(4, channels=3), patch_factory(4, channels=3, frame_id=1),
                  FAST)

    def test_checkpoints(self, patch_factory, tmp_path):
        cfg = FAST.updated(checkpoint_every=1)
        train(trainable_model(), patch_factory(8), patch_factory(4, frame_id=1), cfg, execution=SEQUENTIAL,
              checkpoint_dir=tmp_path)
        assert sorted(p.name for p in tmp_path.glob("*.ocnn")) == ["checkpoint_epoch_001.ocnn",
                                                                    "checkpoint_epoch_002.ocnn"]

    def test_test_subsample(self, patch_factory):
        cfg = FAST.updated(epochs=1, test_subsample=3)
        _, records = train(trainable_model(), patch_factory(8), patch_factory(10, frame_id=1), cfg,
                           execution=SEQUENTIAL)
        assert records[0].test_error in {0.0, 1 / 3, 2 / 3, 1.0}


class TestClassify:
    def test_symmetric_logits_give_half_confidence(self):
        model = init_model(4, filters=(2, 2, 4))
        model.params["fc.weight"][:] = 0.0
        label, confidence = classify(model, np.zeros((4, 32, 32), dtype=np.float32))
        assert confidence == pytest.approx(0.5)
        assert label == PatchLabel.NO_OCCLUSION

    def test_batch_matches_single(self, small_model, patch_factory):
        patches = patch_factory(5)
        probs = classify_batch(small_model, patches.data, batch_size=2, execution=SEQUENTIAL)
        assert probs.shape == (5, 2)
        for index in range(5):
            _, confidence = classify(small_model, patches.data[index])
            assert confidence == pytest.approx(probs[index, 1], rel=1e-5)
        full = classify_batch(small_model, patches.data, execution=SEQUENTIAL)
        np.testing.assert_array_equal(predict_labels(small_model, patches, SEQUENTIAL), np.argmax(full, axis=1))

    def test_wrong_channels(self, small_model):
        with pytest.raises(ShapeError):
            classify(small_model, np.zeros((3, 32, 32), dtype=np.float32))

    def test_error_rate_of_empty_set(self, small_model, patch_factory):
        with pytest.raises(DataError):
            error_rate(small_model, patch_factory(0))


@pytest.fixture(scope="module")
def scene_split():
    """Normalized train/test patches from a small moving synthetic scene."""
    rendered = synth_sequence(random_scene(64, 96, frames=6, boxes=2, paints=1, seed=3))
    frames = [r.frame for r in rendered]
    labels = [r.labels for r in rendered]
    train_set = extract_sequence(frames[:4], labels[:4], stride=8, execution=SEQUENTIAL)
    test_set = extract_sequence(frames[4:], labels[4:], stride=8, execution=SEQUENTIAL)
    stats = compute_stats(train_set)
    return normalize(train_set, stats), normalize(test_set, stats)


class TestTrainingDynamics:
    EPOCHS = 20
    WINDOW = 5

    def _run(self, train_set, test_set, **overrides):
        cfg = TrainConfig(epochs=self.EPOCHS, batch_size=16, lr=0.01, shuffle_seed=7).updated(**overrides)
        return train(trainable_model(3), train_set, test_set, cfg, execution=SEQUENTIAL)

    def test_loss_falls_between_first_and_last_epochs(self, scene_split):
        _, records = self._run(*scene_split)
        losses = [r.mean_loss for r in records]
        assert np.mean(losses[:self.WINDOW]) > np.mean(losses[-self.WINDOW:])

    def test_smoothed_train_error_does_not_rise(self, scene_split):
        _, records = self._run(*scene_split)
        errors = np.array([r.train_error for r in records])
        smoothed = errors.reshape(-1, self.WINDOW).mean(axis=1)
        # window means may wobble by a few patches
        assert np.all(np.diff(smoothed) <= 0.02)

    def test_train_order_matters_but_is_reproducible(self, scene_split):
        train_set, test_set = scene_split
        reordered = train_set.subset(np.random.default_rng(1).permutation(len(train_set)))
        model_a, _ = self._run(train_set, test_set, epochs=2)
        model_b, _ = self._run(train_set, test_set, epochs=2)
        model_c, _ = self._run(reordered, test_set, epochs=2)
        for name in model_a.params:
            np.testing.assert_array_equal(model_a.params[name], model_b.params[name])
        assert any(not np.array_equal(model_a.params[name], model_c.params[name]) for name in model_a.params)

    def test_train_error_is_measured_after_the_epoch(self, scene_split):
        train_set, test_set = scene_split
        model, records = self._run(train_set, test_set, epochs=1)
        assert records[0].train_error == error_rate(model, train_set, SEQUENTIAL)
        assert records[0].test_error == error_rate(model, test_set, SEQUENTIAL)

    def test_train_subsample(self, scene_split):
        _, records = self._run(*scene_split, epochs=2, train_subsample=4)
        assert all(r.train_error in {0.0, 0.25, 0.5, 0.75, 1.0} for r in records)
