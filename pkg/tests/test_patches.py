"""Tests for patch extraction, normalization, splitting and balancing."""

import numpy as np
import pytest

from models.frame_models import EdgeLabel, LabelFrame, PatchLabel, RgbdFrame, SplitSpec
from services.dataset import (
    balance_patches,
    compute_stats,
    drop_depth,
    extract_patches,
    extract_sequence,
    grid_positions,
    make_labels,
    normalize,
    patch_label,
    split_sequence,
)
from utils.errors import ConfigError, DataError, ShapeError


def step_frame(height: int = 64, width: int = 64, step_col: int = 32, frame_id: int = 0) -> RgbdFrame:
    depth = np.full((height, width), 1.0, dtype=np.float32)
    depth[:, step_col:] = 2.0
    rgb = np.random.default_rng(frame_id).integers(0, 256, (height, width, 3)).astype(np.uint8)
    return RgbdFrame.from_depth(rgb, depth, timestamp=frame_id / 30.0, frame_id=frame_id)


class TestGrid:
    def test_vga_counts(self):
        assert len(grid_positions(480, 640, 8)[0]) == 57 * 77 == 4389
        assert len(grid_positions(480, 640, 4)[0]) == 113 * 153 == 17289

    def test_row_major_order(self):
        rows, cols = grid_positions(40, 48, 8)
        assert list(zip(rows, cols))[:3] == [(0, 0), (0, 8), (0, 16)]
        assert (rows[-1], cols[-1]) == (8, 16)

    def test_frame_smaller_than_patch(self):
        with pytest.raises(DataError):
            grid_positions(31, 64, 8)

    def test_stride_must_be_positive(self):
        with pytest.raises(ConfigError):
            grid_positions(64, 64, 0)


class TestPatchLabel:
    @pytest.mark.parametrize("occlusion,expected", [(0, PatchLabel.NO_OCCLUSION), (1, PatchLabel.NO_OCCLUSION),
                                                    (2, PatchLabel.OCCLUSION), (4, PatchLabel.OCCLUSION)])
    def test_majority_of_center_block(self, occlusion, expected):
        block = np.full(4, EdgeLabel.NO_EDGE)
        block[:occlusion] = EdgeLabel.OCCLUSION
        assert patch_label(block.reshape(2, 2)) == expected

    def test_only_center_block_matters(self, rng):
        frame = step_frame()
        labels = make_labels(frame)
        baseline = extract_patches(frame, labels, stride=4, max_invalid_fraction=1.0)
        keep = np.zeros(labels.shape, dtype=bool)
        for r, c in zip(baseline.rows, baseline.cols):
            keep[r + 15:r + 17, c + 15:c + 17] = True
        for _ in range(5):
            noise = rng.choice([EdgeLabel.NO_EDGE, EdgeLabel.OCCLUSION], size=labels.shape).astype(np.uint8)
            scrambled = LabelFrame(np.where(keep, labels.labels, noise))
            patches = extract_patches(frame, scrambled, stride=4, max_invalid_fraction=1.0)
            np.testing.assert_array_equal(patches.labels, baseline.labels)


class TestExtractPatches:
    def test_step_edge_oracle(self):
        frame = step_frame()
        labels = make_labels(frame, tau_depth=0.1)
        patches = extract_patches(frame, labels, stride=1)
        assert len(patches) == 33 * 33
        for index in range(len(patches)):
            r, c = int(patches.rows[index]), int(patches.cols[index])
            expected = patch_label(labels.labels[r + 15:r + 17, c + 15:c + 17])
            assert patches.labels[index] == expected
        assert set(patches.cols[patches.labels == PatchLabel.OCCLUSION].tolist()) == {15, 16, 17}

    def test_patch_data_is_frame_crop(self):
        frame = step_frame()
        patches = extract_patches(frame, make_labels(frame), stride=16)
        tensor = frame.stacked(4)
        for index in range(len(patches)):
            r, c = int(patches.rows[index]), int(patches.cols[index])
            np.testing.assert_array_equal(patches.data[index], tensor[:, r:r + 32, c:c + 32])
        assert patches.data.dtype == np.float32

    def test_rgb_patches_drop_depth_channel(self):
        frame = step_frame()
        patches = extract_patches(frame, make_labels(frame), stride=16, channels=3)
        assert patches.data.shape == (9, 3, 32, 32)

    def test_invalid_center_rejected(self):
        frame = step_frame()
        depth = frame.depth.copy()
        depth[31, 31] = 0.0
        holed = RgbdFrame.from_depth(frame.rgb, depth)
        patches = extract_patches(holed, make_labels(holed), stride=16, max_invalid_fraction=1.0)
        assert (16, 16) not in set(zip(patches.rows.tolist(), patches.cols.tolist()))
        assert len(patches) == 8

    def test_rejection_is_monotone_in_invalid_fraction(self, rng):
        frame = step_frame(96, 96)
        depth = frame.depth.copy()
        depth[rng.random(depth.shape) < 0.08] = 0.0
        noisy = RgbdFrame.from_depth(frame.rgb, depth)
        labels = make_labels(noisy)
        counts = [len(extract_patches(noisy, labels, stride=8, max_invalid_fraction=f))
                  for f in (0.0, 0.05, 0.1, 0.2, 1.0)]
        assert counts == sorted(counts)
        assert counts[-1] <= len(grid_positions(96, 96, 8)[0])

    def test_no_invalid_pixels_keeps_whole_grid(self):
        frame = step_frame(96, 128)
        patches = extract_patches(frame, make_labels(frame), stride=8)
        assert len(patches) == len(grid_positions(96, 128, 8)[0])

    def test_appearance_mask_tags_center(self):
        frame = step_frame()
        mask = np.zeros(frame.shape, dtype=bool)
        mask[15, 15] = True
        patches = extract_patches(frame, make_labels(frame), stride=16, appearance_mask=mask)
        tagged = [(int(r), int(c)) for r, c, a in zip(patches.rows, patches.cols, patches.appearance) if a]
        assert tagged == [(0, 0)]

    def test_mismatched_labels(self):
        frame = step_frame()
        with pytest.raises(DataError):
            extract_patches(frame, LabelFrame(np.ones((10, 10), dtype=np.uint8)))

    def test_sequence_keeps_frame_provenance(self):
        frames = [step_frame(frame_id=i) for i in range(3)]
        patches = extract_sequence(frames, [make_labels(f) for f in frames], stride=16)
        assert patches.frames() == {0, 1, 2}
        assert list(patches.frame_ids) == sorted(patches.frame_ids)


class TestNormalization:
    def test_train_means_become_zero(self):
        frame = step_frame()
        patches = extract_patches(frame, make_labels(frame), stride=4)
        stats = compute_stats(patches)
        assert stats.channels == 4 and len(stats.means) == 4
        assert stats.patch_count == len(patches)
        normalized = normalize(patches, stats)
        np.testing.assert_allclose(normalized.data.mean(axis=(0, 2, 3)), 0.0, atol=1e-5)

    def test_normalize_is_affine(self, patch_factory):
        a, b = patch_factory(6, seed=1), patch_factory(6, seed=2)
        stats = compute_stats(a)
        mixed = a.with_data(0.25 * a.data + 0.75 * b.data)
        expected = 0.25 * normalize(a, stats).data + 0.75 * normalize(b, stats).data
        np.testing.assert_allclose(normalize(mixed, stats).data, expected, atol=1e-6)
        np.testing.assert_allclose(normalize(a, stats).data - normalize(b, stats).data, a.data - b.data, atol=1e-6)

    def test_channel_mismatch(self):
        frame = step_frame()
        patches = extract_patches(frame, make_labels(frame), stride=16)
        stats = compute_stats(drop_depth(patches))
        with pytest.raises(ShapeError):
            normalize(patches, stats)

    def test_empty_training_set(self, patch_factory):
        with pytest.raises(DataError):
            compute_stats(patch_factory(0))


class TestSplit:
    def test_fraction_split_is_contiguous(self):
        frames = [step_frame(frame_id=i) for i in range(10)]
        train, test = split_sequence(frames, SplitSpec(train_fraction=0.7))
        assert [f.frame_id for f in train] == list(range(7))
        assert [f.frame_id for f in test] == [7, 8, 9]

    def test_explicit_boundary(self):
        frames = [step_frame(frame_id=i) for i in range(5)]
        train, test = split_sequence(frames, SplitSpec(boundary=2))
        assert len(train) == 2 and len(test) == 3

    def test_degenerate_boundary(self):
        frames = [step_frame(frame_id=i) for i in range(3)]
        with pytest.raises(ConfigError):
            split_sequence(frames, SplitSpec(boundary=3))

    def test_train_and_test_patches_are_disjoint(self):
        frames = [step_frame(frame_id=i) for i in range(6)]
        train, test = split_sequence(frames, SplitSpec(train_fraction=0.5))
        train_patches = extract_sequence(train, [make_labels(f) for f in train], stride=16)
        test_patches = extract_sequence(test, [make_labels(f) for f in test], stride=16)
        assert not train_patches.frames() & test_patches.frames()

    def test_fraction_bounds(self):
        with pytest.raises(ConfigError):
            SplitSpec(train_fraction=1.0)


class TestBalance:
    def test_ratio_limits_negatives(self, patch_factory):
        patches = patch_factory(40, positives=5)
        balanced = balance_patches(patches, ratio=2.0, seed=3)
        assert balanced.positives == 5
        assert len(balanced) == 15
        assert list(balanced.rows) == sorted(balanced.rows)

    def test_seeded(self, patch_factory):
        patches = patch_factory(40, positives=5)
        a = balance_patches(patches, 1.0, seed=3)
        b = balance_patches(patches, 1.0, seed=3)
        np.testing.assert_array_equal(a.rows, b.rows)

    def test_ratio_must_be_positive(self, patch_factory):
        with pytest.raises(ConfigError):
            balance_patches(patch_factory(4), 0.0)


def test_drop_depth(patch_factory):
    rgbd = patch_factory(3)
    rgb = drop_depth(rgbd)
    assert rgb.channels == 3
    np.testing.assert_array_equal(rgb.data, rgbd.data[:, :3])
    assert drop_depth(rgb) is rgb
