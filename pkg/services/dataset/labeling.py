"""
Occlusion ground truth from depth.

A pixel is an occlusion edge when it is valid, has at least one valid
8-neighbor, and the largest absolute depth difference to its valid
8-neighbors exceeds tau_depth. Pixels that are invalid, or whose 8-neighbors
are all invalid, are labeled Invalid. Border pixels use the neighbors that
exist inside the frame.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from models.frame_models import EdgeLabel, LabelFrame, RgbdFrame
from utils.constants import (
    DEFAULT_TAU_DEPTH,
    LABEL_GRAY_INVALID,
    LABEL_GRAY_NO_EDGE,
    LABEL_GRAY_OCCLUSION,
)
from services.dataset.tum_io import write_png
from utils.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

NEIGHBOR_OFFSETS = [(-1, -1), (-1, 0), (-1, 1),
                    (0, -1),           (0, 1),
                    (1, -1),  (1, 0),  (1, 1)]

_GRAY = {
    EdgeLabel.INVALID: LABEL_GRAY_INVALID,
    EdgeLabel.NO_EDGE: LABEL_GRAY_NO_EDGE,
    EdgeLabel.OCCLUSION: LABEL_GRAY_OCCLUSION,
}


def neighbor_views(array: np.ndarray, fill):
    """Yield the array shifted onto each 8-neighbor, padded with fill."""
    h, w = array.shape
    padded = np.pad(array, 1, mode="constant", constant_values=fill)
    for dy, dx in NEIGHBOR_OFFSETS:
        yield padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]


def make_labels(frame: RgbdFrame, tau_depth: float = DEFAULT_TAU_DEPTH) -> LabelFrame:
    """
    Threshold depth discontinuities into a trivalent label frame.

    Args:
        frame: Registered RGB-D frame
        tau_depth: Discontinuity threshold in meters, > 0

    Returns:
        LabelFrame with Invalid / NoEdge / OcclusionEdge per pixel
    """
    if tau_depth <= 0:
        raise ConfigError(f"tau_depth must be positive, got {tau_depth}")
    depth = frame.depth.astype(np.float64)
    valid = frame.valid_mask

    max_diff = np.zeros_like(depth)
    any_valid_neighbor = np.zeros_like(valid)
    for neighbor_depth, neighbor_valid in zip(neighbor_views(depth, 0.0), neighbor_views(valid, False)):
        both = valid & neighbor_valid
        diff = np.where(both, np.abs(depth - neighbor_depth), 0.0)
        np.maximum(max_diff, diff, out=max_diff)
        any_valid_neighbor |= neighbor_valid

    labels = np.full(depth.shape, EdgeLabel.NO_EDGE, dtype=np.uint8)
    labels[valid & any_valid_neighbor & (max_diff > tau_depth)] = EdgeLabel.OCCLUSION
    labels[~valid | ~any_valid_neighbor] = EdgeLabel.INVALID
    return LabelFrame(labels=labels, frame_id=frame.frame_id)


def label_image(labels: LabelFrame) -> np.ndarray:
    """8-bit rendering: Invalid black, NoEdge gray, OcclusionEdge white."""
    lut = np.zeros(256, dtype=np.uint8)
    for label, gray in _GRAY.items():
        lut[int(label)] = gray
    return lut[labels.labels]


def labels_from_image(image: np.ndarray, frame_id: int = 0) -> LabelFrame:
    """Inverse of label_image; any other gray value is a data error."""
    labels = np.full(image.shape, 255, dtype=np.uint8)
    for label, gray in _GRAY.items():
        labels[image == gray] = int(label)
    if np.any(labels == 255):
        unknown = sorted(set(np.unique(image).tolist()) - set(_GRAY.values()))
        raise DataError(f"label image holds unknown gray values {unknown}")
    return LabelFrame(labels=labels, frame_id=frame_id)


def write_label_png(labels: LabelFrame, path: Union[str, Path]) -> None:
    write_png(path, label_image(labels))
