"""
Inference Fusion Service

Sweeps a trained model over a frame on a constant stride and fuses the
per-patch occlusion confidences into a heatmap with truncated Gaussian
kernels. A patch's center is its top-left corner + 16 in both axes.
"""

import logging
import math
import time
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from models.config_models import FusionConfig, FusionMode
from models.frame_models import NormalizationStats, RgbdFrame
from models.fusion_models import Classification, Heatmap
from models.network_models import CnnModel
from services.dataset.patches import grid_positions, normalize_tensor
from services.dataset.tum_io import write_png
from services.training import classify_batch
from utils.constants import PATCH_CENTER
from utils.errors import ConfigError, DataError, ShapeError
from utils.parallel import Execution, resolve

logger = logging.getLogger(__name__)

TRUNCATION = 2.0
TILE_ROWS = 64
FALSE_COLOR_MAP = cv2.COLORMAP_JET


def fwhm_to_sigma(fwhm: float) -> float:
    return fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def gaussian_kernel(confidence: float, fwhm: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """
    Isotropic Gaussian of peak `confidence`, half of it at radius fwhm / 2,
    zero beyond radius 2 * fwhm. The returned function takes row and column
    offsets (scalars or arrays).
    """
    if not 0.0 <= confidence <= 1.0:
        raise ConfigError(f"confidence must be in [0, 1], got {confidence}")
    if fwhm <= 0:
        raise ConfigError(f"fwhm must be positive, got {fwhm}")
    two_sigma_sq = 2.0 * fwhm_to_sigma(fwhm) ** 2
    radius_sq = (TRUNCATION * fwhm) ** 2

    def kernel(dr, dc):
        dist_sq = np.asarray(dr, dtype=np.float64) ** 2 + np.asarray(dc, dtype=np.float64) ** 2
        return np.where(dist_sq <= radius_sq, confidence * np.exp(-dist_sq / two_sigma_sq), 0.0)

    return kernel


def _unit_stencil(fwhm: float) -> Tuple[np.ndarray, int]:
    radius = int(math.floor(TRUNCATION * fwhm))
    offsets = np.arange(-radius, radius + 1)
    return gaussian_kernel(1.0, fwhm)(offsets[:, np.newaxis], offsets[np.newaxis, :]), radius


def sweep(model: CnnModel, frame: RgbdFrame, stats: Optional[NormalizationStats], cfg: FusionConfig,
          execution: Optional[Execution] = None) -> List[Classification]:
    """
    Classify every patch of the stride grid.

    Returns:
        One Classification per grid position, row-major
    """
    if stats is None:
        raise DataError("normalization stats are required to sweep a frame")
    if stats.channels != model.channels:
        raise ShapeError("channels", model.channels, stats.channels, op="sweep")
    height, width = frame.shape
    rows, cols = grid_positions(height, width, cfg.sweep_stride, cfg.patch_size)
    tensor = normalize_tensor(frame.stacked(model.channels), stats)
    windows = sliding_window_view(tensor, (cfg.patch_size, cfg.patch_size), axis=(1, 2))

    execution = resolve(execution)
    confidences = np.empty(len(rows), dtype=np.float64)
    for start in range(0, len(rows), cfg.batch_size):
        r = rows[start:start + cfg.batch_size]
        c = cols[start:start + cfg.batch_size]
        batch = np.ascontiguousarray(windows[:, r, c].transpose(1, 0, 2, 3))
        confidences[start:start + len(r)] = classify_batch(model, batch, cfg.batch_size, execution)[:, 1]
    logger.debug(f"Swept frame {frame.frame_id}: {len(rows)} patches at stride {cfg.sweep_stride}")
    return [Classification(row=int(r) + PATCH_CENTER, col=int(c) + PATCH_CENTER, confidence=float(p))
            for r, c, p in zip(rows, cols, confidences)]


def _fuse_tile(ordered: np.ndarray, stencil: np.ndarray, radius: int, top: int, bottom: int,
               width: int) -> Tuple[np.ndarray, np.ndarray]:
    weighted = np.zeros((bottom - top, width), dtype=np.float64)
    coverage = np.zeros((bottom - top, width), dtype=np.float64)
    reach = (ordered[:, 0] + radius >= top) & (ordered[:, 0] - radius < bottom)
    for row, col, confidence in ordered[reach]:
        row, col = int(row), int(col)
        r0, r1 = max(row - radius, top), min(row + radius + 1, bottom)
        c0, c1 = max(col - radius, 0), min(col + radius + 1, width)
        if c0 >= c1:
            continue
        weights = stencil[r0 - row + radius:r1 - row + radius, c0 - col + radius:c1 - col + radius]
        weighted[r0 - top:r1 - top, c0:c1] += confidence * weights
        coverage[r0 - top:r1 - top, c0:c1] += weights
    return weighted, coverage


def fuse(classifications: Sequence[Classification], cfg: FusionConfig, frame_shape: Tuple[int, int],
         frame_id: int = 0, execution: Optional[Execution] = None) -> Heatmap:
    """
    Kernel-weighted mixture of patch confidences.

    Normalized mode: values = sum(conf_i * G_i) / sum(G_i) with unit-peak G_i.
    Sum mode: values = clip(sum(conf_i * G_i), 0, 1). Pixels no kernel reaches
    have zero coverage and value 0. Classifications are accumulated in sorted
    (row, col, confidence) order in fixed row tiles, so the result does not
    depend on input order or worker count.
    """
    if not classifications:
        raise DataError("fuse needs at least one classification")
    height, width = frame_shape
    stencil, radius = _unit_stencil(cfg.fwhm)
    ordered = np.array(sorted((c.row, c.col, c.confidence) for c in classifications), dtype=np.float64)

    tiles = [(top, min(top + TILE_ROWS, height)) for top in range(0, height, TILE_ROWS)]
    parts = resolve(execution).map(
        lambda tile: _fuse_tile(ordered, stencil, radius, tile[0], tile[1], width), tiles)
    weighted = np.concatenate([p[0] for p in parts])
    coverage = np.concatenate([p[1] for p in parts])

    if cfg.mode == FusionMode.SUM:
        values = np.clip(weighted, 0.0, 1.0)
    else:
        values = np.divide(weighted, coverage, out=np.zeros_like(weighted), where=coverage > 0)
        values = np.clip(values, 0.0, 1.0)
    values[coverage <= 0] = 0.0
    return Heatmap(values=values, coverage=coverage, frame_id=frame_id)


def binarize(heatmap: Heatmap, threshold: float) -> np.ndarray:
    """Strictly-above-threshold mask, limited to covered pixels."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")
    return (heatmap.values > threshold) & heatmap.covered


def to_gray(heatmap: Heatmap) -> np.ndarray:
    return np.rint(np.clip(heatmap.values, 0.0, 1.0) * 255.0).astype(np.uint8)


def render(heatmap: Heatmap, path: Union[str, Path], false_color_path: Optional[Union[str, Path]] = None) -> None:
    """
    Write the heatmap as 8-bit grayscale (round(255 * value)) and optionally
    a false-color PNG on the jet ramp (blue low, yellow medium, red high).
    """
    gray = to_gray(heatmap)
    write_png(path, gray)
    if false_color_path is not None:
        write_png(false_color_path, cv2.applyColorMap(gray, FALSE_COLOR_MAP))
    logger.info(f"Wrote heatmap of frame {heatmap.frame_id} to {path}")


def write_mask(mask: np.ndarray, path: Union[str, Path]) -> None:
    write_png(path, mask.astype(np.uint8) * 255)


def infer_frame(model: CnnModel, frame: RgbdFrame, stats: NormalizationStats, cfg: FusionConfig,
                execution: Optional[Execution] = None) -> Tuple[Heatmap, int, float]:
    """
    Sweep and fuse one frame.

    Returns:
        (heatmap, patch count, wall time in seconds)
    """
    started = time.perf_counter()
    classifications = sweep(model, frame, stats, cfg, execution)
    heatmap = fuse(classifications, cfg, frame.shape, frame.frame_id, execution)
    wall_time = time.perf_counter() - started
    logger.info(f"Frame {frame.frame_id}: {len(classifications)} patches at stride {cfg.sweep_stride} "
                f"in {wall_time:.3f}s")
    return heatmap, len(classifications), wall_time
