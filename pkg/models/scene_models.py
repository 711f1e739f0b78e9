"""
Synthetic Scene Models

Axis-aligned rectangles over a background plane: depth boxes (occluders),
painted rectangles (texture only, background depth) and holes (no depth).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from models.frame_models import LabelFrame, RgbdFrame


class RectKind(Enum):
    BOX = "box"
    PAINT = "paint"
    HOLE = "hole"


@dataclass(frozen=True)
class SceneRect:
    """
    One rectangle of a synthetic scene.

    Attributes:
        kind: Box, painted rectangle or depth hole
        row: Top row at frame 0
        col: Left column at frame 0
        height: Extent in rows
        width: Extent in columns
        depth: Meters, boxes only
        velocity: (rows, cols) moved per frame
        line: Spec file line the rectangle came from
    """
    kind: RectKind
    row: int
    col: int
    height: int
    width: int
    depth: Optional[float] = None
    velocity: Tuple[float, float] = (0.0, 0.0)
    line: Optional[int] = None

    def at(self, frame_index: int) -> Tuple[int, int, int, int]:
        """(top, left, bottom, right) at a frame, bottom/right exclusive."""
        top = int(round(self.row + self.velocity[0] * frame_index))
        left = int(round(self.col + self.velocity[1] * frame_index))
        return top, left, top + self.height, left + self.width


@dataclass(frozen=True)
class SceneSpec:
    """
    Synthetic scene description.

    Attributes:
        height: Frame rows
        width: Frame columns
        frames: Number of frames to render
        background_depth: Depth of the background plane in meters
        seed: Texture and noise seed
        tau_depth: Discontinuity threshold the analytic labels assume
        shadow: (rows, cols) offset of box shadows on the background, (0, 0) disables
        fps: Frame rate used for timestamps
        rects: Rectangles in drawing order
    """
    height: int = 480
    width: int = 640
    frames: int = 1
    background_depth: float = 3.0
    seed: int = 0
    tau_depth: float = 0.1
    shadow: Tuple[int, int] = (0, 0)
    fps: float = 30.0
    rects: Tuple[SceneRect, ...] = field(default_factory=tuple)

    def of_kind(self, kind: RectKind) -> Tuple[SceneRect, ...]:
        return tuple(r for r in self.rects if r.kind == kind)


@dataclass
class SyntheticFrame:
    """Rendered frame with its exact labels and appearance-edge mask"""
    frame: RgbdFrame
    labels: LabelFrame
    appearance: np.ndarray
