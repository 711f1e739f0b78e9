"""
Fusion Models

Sweep classifications, fused heatmaps and the per-frame timing entries.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field


@dataclass(frozen=True)
class Classification:
    """
    Occlusion confidence of one swept patch.

    Attributes:
        row: Patch center row (top-left + 16)
        col: Patch center column (top-left + 16)
        confidence: Softmax probability of the occlusion class
    """
    row: int
    col: int
    confidence: float


@dataclass
class Heatmap:
    """
    Fused occlusion confidence over a frame.

    Attributes:
        values: (H, W) float64 in [0, 1], 0 where uncovered
        coverage: (H, W) float64 sum of unit-peak kernel weights
        frame_id: Source frame
    """
    values: np.ndarray
    coverage: np.ndarray
    frame_id: int = 0

    @property
    def covered(self) -> np.ndarray:
        return self.coverage > 0

    @property
    def shape(self):
        return self.values.shape


class FrameTiming(BaseModel):
    """One JSON-lines entry of the stride trade-off sidecar"""
    frame_id: int
    stride: int = Field(..., ge=1)
    patch_count: int = Field(..., ge=0)
    wall_time: float = Field(..., ge=0, description="Seconds for sweep plus fusion")
    fwhm: float
    heatmap_path: Optional[str] = None
