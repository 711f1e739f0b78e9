"""
Patch extraction, normalization and trajectory splitting.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from models.frame_models import (
    EdgeLabel,
    LabelFrame,
    NormalizationStats,
    PatchLabel,
    PatchSet,
    RgbdFrame,
    SplitSpec,
)
from utils.constants import (
    CENTER_BLOCK,
    DEFAULT_MAJORITY,
    DEFAULT_MAX_INVALID_FRACTION,
    DEFAULT_EXTRACT_STRIDE,
    PATCH_SIZE,
)
from utils.errors import ConfigError, DataError, ShapeError
from utils.parallel import Execution, resolve

logger = logging.getLogger(__name__)

_CENTER_OFFSETS = [(r, c) for r in range(CENTER_BLOCK.start, CENTER_BLOCK.stop)
                   for c in range(CENTER_BLOCK.start, CENTER_BLOCK.stop)]


def grid_positions(height: int, width: int, stride: int,
                   patch_size: int = PATCH_SIZE) -> Tuple[np.ndarray, np.ndarray]:
    """Top-left corners of every patch on a stride grid, row-major."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    if height < patch_size or width < patch_size:
        raise DataError(f"frame {height}x{width} is smaller than {patch_size}x{patch_size}")
    rows = np.arange(0, height - patch_size + 1, stride)
    cols = np.arange(0, width - patch_size + 1, stride)
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    return grid_r.ravel(), grid_c.ravel()


def _window_counts(mask: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Count of True pixels inside each 32x32 window, via an integral image."""
    integral = np.pad(np.cumsum(np.cumsum(mask.astype(np.int64), axis=0), axis=1), ((1, 0), (1, 0)))
    r2, c2 = rows + PATCH_SIZE, cols + PATCH_SIZE
    return integral[r2, c2] - integral[rows, c2] - integral[r2, cols] + integral[rows, cols]


def center_occlusion_counts(labels: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(occlusion pixels, invalid pixels) inside each window's central 2x2 block."""
    occlusion = np.zeros(len(rows), dtype=np.int32)
    invalid = np.zeros(len(rows), dtype=np.int32)
    for dr, dc in _CENTER_OFFSETS:
        values = labels[rows + dr, cols + dc]
        occlusion += values == EdgeLabel.OCCLUSION
        invalid += values == EdgeLabel.INVALID
    return occlusion, invalid


def center_labels(occlusion_counts: np.ndarray, majority: int = DEFAULT_MAJORITY) -> np.ndarray:
    """PatchLabel per patch from the number of occlusion pixels in its central block."""
    occlusion_counts = np.asarray(occlusion_counts)
    return np.where(occlusion_counts >= majority, PatchLabel.OCCLUSION, PatchLabel.NO_OCCLUSION).astype(np.uint8)


def patch_label(center_block: np.ndarray, majority: int = DEFAULT_MAJORITY) -> PatchLabel:
    """Label of one patch from its central 2x2 EdgeLabel block."""
    occlusion = np.count_nonzero(np.asarray(center_block) == EdgeLabel.OCCLUSION)
    return PatchLabel(int(center_labels(occlusion, majority)))


def extract_patches(
    frame: RgbdFrame,
    labelframe: LabelFrame,
    stride: int = DEFAULT_EXTRACT_STRIDE,
    max_invalid_fraction: float = DEFAULT_MAX_INVALID_FRACTION,
    channels: int = 4,
    majority: int = DEFAULT_MAJORITY,
    appearance_mask: Optional[np.ndarray] = None,
) -> PatchSet:
    """
    Cut labeled 32x32 patches on a stride grid.

    A patch is rejected when any central 2x2 pixel is Invalid or when the
    Invalid share of the whole patch exceeds max_invalid_fraction. Accepted
    patches are Occlusion when at least `majority` central pixels are
    occlusion edges.

    Args:
        frame: Source frame
        labelframe: Labels of the same frame
        stride: Grid step in pixels
        max_invalid_fraction: Largest tolerated share of Invalid pixels
        channels: 4 (RGB-D) or 3 (RGB)
        majority: Central occlusion pixels needed for the Occlusion class
        appearance_mask: Optional (H, W) bool map of appearance-only edges;
            patches whose central block touches one are tagged

    Returns:
        PatchSet in row-major grid order, data in scaled units
    """
    if labelframe.shape != frame.shape:
        raise DataError(f"label frame {labelframe.shape} does not match frame {frame.shape}")
    if not 1 <= majority <= len(_CENTER_OFFSETS):
        raise ConfigError(f"majority must be in [1, {len(_CENTER_OFFSETS)}], got {majority}")
    rows, cols = grid_positions(frame.shape[0], frame.shape[1], stride)
    labels = labelframe.labels

    invalid_fraction = _window_counts(labels == EdgeLabel.INVALID, rows, cols) / float(PATCH_SIZE * PATCH_SIZE)
    occlusion, center_invalid = center_occlusion_counts(labels, rows, cols)
    keep = (center_invalid == 0) & (invalid_fraction <= max_invalid_fraction)
    rows, cols, occlusion = rows[keep], cols[keep], occlusion[keep]

    appearance = np.zeros(len(rows), dtype=bool)
    if appearance_mask is not None:
        if appearance_mask.shape != frame.shape:
            raise DataError(f"appearance mask {appearance_mask.shape} does not match frame {frame.shape}")
        for dr, dc in _CENTER_OFFSETS:
            appearance |= appearance_mask[rows + dr, cols + dc]

    windows = sliding_window_view(frame.stacked(channels), (PATCH_SIZE, PATCH_SIZE), axis=(1, 2))
    data = np.ascontiguousarray(windows[:, rows, cols].transpose(1, 0, 2, 3), dtype=np.float32)

    patches = PatchSet(
        data=data,
        labels=center_labels(occlusion, majority),
        frame_ids=np.full(len(rows), frame.frame_id, dtype=np.int32),
        rows=rows.astype(np.int32),
        cols=cols.astype(np.int32),
        appearance=appearance,
        channels=channels,
    )
    logger.debug(f"Frame {frame.frame_id}: {len(patches)} patches kept of {len(keep)}, "
                 f"{patches.positives} occlusion")
    return patches


def extract_sequence(
    frames: Sequence[RgbdFrame],
    labelframes: Sequence[LabelFrame],
    stride: int = DEFAULT_EXTRACT_STRIDE,
    max_invalid_fraction: float = DEFAULT_MAX_INVALID_FRACTION,
    channels: int = 4,
    majority: int = DEFAULT_MAJORITY,
    appearance_masks: Optional[Sequence[Optional[np.ndarray]]] = None,
    execution: Optional[Execution] = None,
) -> PatchSet:
    """Extract patches from every frame, merged in frame order."""
    if len(frames) != len(labelframes):
        raise DataError(f"{len(frames)} frames but {len(labelframes)} label frames")
    masks = list(appearance_masks) if appearance_masks is not None else [None] * len(frames)
    parts = resolve(execution).map(
        lambda i: extract_patches(frames[i], labelframes[i], stride, max_invalid_fraction,
                                  channels, majority, masks[i]),
        range(len(frames)))
    patches = PatchSet.concatenate(parts, channels)
    logger.info(f"Extracted {len(patches)} patches ({patches.positives} occlusion) from {len(frames)} frames")
    return patches


def compute_stats(train_patches: PatchSet) -> NormalizationStats:
    """Per-channel means of the training patches."""
    if len(train_patches) == 0:
        raise DataError("cannot compute normalization stats of an empty training set")
    means = train_patches.data.mean(axis=(0, 2, 3), dtype=np.float64)
    return NormalizationStats(channels=train_patches.channels, means=[float(m) for m in means],
                              patch_count=len(train_patches))


def normalize(patches: PatchSet, stats: NormalizationStats) -> PatchSet:
    """Subtract the training means channel by channel."""
    if patches.channels != stats.channels:
        raise ShapeError("channels", stats.channels, patches.channels, op="normalize")
    data = (patches.data.astype(np.float64) - np.asarray(stats.means).reshape(1, -1, 1, 1)).astype(np.float32)
    return patches.with_data(data)


def normalize_tensor(data: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """normalize() for a raw (..., C, H, W) array."""
    if data.shape[-3] != stats.channels:
        raise ShapeError("channels", stats.channels, data.shape[-3], op="normalize")
    return (data.astype(np.float64) - np.asarray(stats.means).reshape(-1, 1, 1)).astype(np.float32)


def split_sequence(frames: Sequence[RgbdFrame], spec: SplitSpec) -> Tuple[List[RgbdFrame], List[RgbdFrame]]:
    """Frames [0, boundary) train, [boundary, end) test."""
    boundary = spec.resolve(len(frames))
    if not 0 < boundary < len(frames):
        raise ConfigError(f"degenerate split boundary {boundary} for {len(frames)} frames")
    return list(frames[:boundary]), list(frames[boundary:])


def balance_patches(patches: PatchSet, ratio: float, seed: int = 0) -> PatchSet:
    """
    Keep every Occlusion patch and at most ratio x as many NoOcclusion
    patches, drawn with a seeded RNG; original order is preserved.
    """
    if ratio <= 0:
        raise ConfigError(f"balance ratio must be positive, got {ratio}")
    positives = np.flatnonzero(patches.labels == PatchLabel.OCCLUSION)
    negatives = np.flatnonzero(patches.labels == PatchLabel.NO_OCCLUSION)
    keep_negatives = min(len(negatives), int(round(ratio * len(positives))))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(negatives, size=keep_negatives, replace=False) if keep_negatives else np.zeros(0, dtype=int)
    kept = np.sort(np.concatenate([positives, chosen]))
    logger.info(f"Balanced patches: {len(positives)} occlusion, {keep_negatives} of {len(negatives)} no-occlusion")
    return patches.subset(kept)


def drop_depth(patches: PatchSet) -> PatchSet:
    """RGB-only view of an RGB-D patch set."""
    if patches.channels == 3:
        return patches
    return PatchSet(data=np.ascontiguousarray(patches.data[:, :3]), labels=patches.labels,
                    frame_ids=patches.frame_ids, rows=patches.rows, cols=patches.cols,
                    appearance=patches.appearance, channels=3)
