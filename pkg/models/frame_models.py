"""
Frame and Patch Models

Data structures for registered RGB-D frames, their trivalent occlusion label
frames and the 32x32 patches cut from them.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, List, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from utils.constants import PATCH_SIZE
from utils.errors import ConfigError, DataError


class EdgeLabel(IntEnum):
    """Per-pixel label of a label frame"""
    INVALID = 0
    NO_EDGE = 1
    OCCLUSION = 2


class PatchLabel(IntEnum):
    """Patch class; values are the network's output indices"""
    NO_OCCLUSION = 0
    OCCLUSION = 1


@dataclass
class RgbdFrame:
    """
    Registered color and depth pair.

    Attributes:
        rgb: (H, W, 3) uint8, RGB order
        depth: (H, W) float32 meters, 0 where invalid
        valid_mask: (H, W) bool, False where depth is unknown
        timestamp: Capture time in seconds
        frame_id: Index of the frame within its sequence
    """
    rgb: np.ndarray
    depth: np.ndarray
    valid_mask: np.ndarray
    timestamp: float = 0.0
    frame_id: int = 0

    def __post_init__(self):
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise DataError(f"frame {self.frame_id}: rgb must be HxWx3, got {self.rgb.shape}")
        if self.depth.shape != self.rgb.shape[:2] or self.valid_mask.shape != self.depth.shape:
            raise DataError(f"frame {self.frame_id}: rgb {self.rgb.shape[:2]}, depth {self.depth.shape} "
                            f"and mask {self.valid_mask.shape} are not registered")
        if np.any(self.depth[self.valid_mask] <= 0):
            raise DataError(f"frame {self.frame_id}: non-positive depth inside the valid mask")
        if np.any(self.depth[~self.valid_mask] != 0):
            raise DataError(f"frame {self.frame_id}: invalid pixels must hold the 0 depth sentinel")

    @classmethod
    def from_depth(cls, rgb: np.ndarray, depth: np.ndarray, timestamp: float = 0.0,
                   frame_id: int = 0) -> "RgbdFrame":
        """Build a frame deriving the validity mask from the 0 sentinel."""
        depth = np.asarray(depth, dtype=np.float32)
        valid = np.isfinite(depth) & (depth > 0)
        depth = np.where(valid, depth, 0).astype(np.float32)
        return cls(rgb=np.asarray(rgb, dtype=np.uint8), depth=depth, valid_mask=valid,
                   timestamp=timestamp, frame_id=frame_id)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.depth.shape

    def stacked(self, channels: int) -> np.ndarray:
        """
        Frame as a (C, H, W) float32 tensor in scaled units: RGB in [0, 1],
        depth in meters as the fourth channel when channels == 4.
        """
        rgb = self.rgb.astype(np.float32).transpose(2, 0, 1) / 255.0
        if channels == 3:
            return rgb
        if channels == 4:
            return np.concatenate([rgb, self.depth[np.newaxis].astype(np.float32)], axis=0)
        raise ConfigError(f"unsupported channel count {channels}")


@dataclass
class LabelFrame:
    """
    Trivalent label image.

    Attributes:
        labels: (H, W) uint8 of EdgeLabel values
        frame_id: Frame the labels were derived from
    """
    labels: np.ndarray
    frame_id: int = 0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape

    def count(self, label: EdgeLabel) -> int:
        return int(np.count_nonzero(self.labels == label))

    def mask(self, label: EdgeLabel) -> np.ndarray:
        return self.labels == label


@dataclass
class Patch:
    """
    One 32x32 crop with its center label.

    Attributes:
        data: (C, 32, 32) float32
        label: Class of the central 2x2 block
        frame_id: Source frame
        row: Top-left row in the source frame
        col: Top-left column in the source frame
        on_appearance_edge: Center block touches an appearance-only edge
    """
    data: np.ndarray
    label: PatchLabel
    frame_id: int
    row: int
    col: int
    on_appearance_edge: bool = False


@dataclass
class PatchSet:
    """
    Column-oriented collection of patches sharing one channel layout.

    Indexing with an int yields a Patch; len() is the patch count.
    """
    data: np.ndarray
    labels: np.ndarray
    frame_ids: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    appearance: np.ndarray = None
    channels: int = 4

    def __post_init__(self):
        n = self.data.shape[0]
        if self.appearance is None:
            self.appearance = np.zeros(n, dtype=bool)
        for name in ("labels", "frame_ids", "rows", "cols", "appearance"):
            if len(getattr(self, name)) != n:
                raise DataError(f"PatchSet.{name} has {len(getattr(self, name))} entries for {n} patches")
        if n and self.data.shape[1:] != (self.channels, PATCH_SIZE, PATCH_SIZE):
            raise DataError(f"PatchSet data must be Nx{self.channels}x{PATCH_SIZE}x{PATCH_SIZE}, "
                            f"got {self.data.shape}")

    @classmethod
    def empty(cls, channels: int) -> "PatchSet":
        return cls(
            data=np.zeros((0, channels, PATCH_SIZE, PATCH_SIZE), dtype=np.float32),
            labels=np.zeros(0, dtype=np.uint8),
            frame_ids=np.zeros(0, dtype=np.int32),
            rows=np.zeros(0, dtype=np.int32),
            cols=np.zeros(0, dtype=np.int32),
            appearance=np.zeros(0, dtype=bool),
            channels=channels,
        )

    @classmethod
    def concatenate(cls, parts: Iterable["PatchSet"], channels: int) -> "PatchSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(channels)
        return cls(
            data=np.concatenate([p.data for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            frame_ids=np.concatenate([p.frame_ids for p in parts]),
            rows=np.concatenate([p.rows for p in parts]),
            cols=np.concatenate([p.cols for p in parts]),
            appearance=np.concatenate([p.appearance for p in parts]),
            channels=channels,
        )

    def __len__(self) -> int:
        return int(self.data.shape[0])

    def __getitem__(self, index: int) -> Patch:
        return Patch(
            data=self.data[index],
            label=PatchLabel(int(self.labels[index])),
            frame_id=int(self.frame_ids[index]),
            row=int(self.rows[index]),
            col=int(self.cols[index]),
            on_appearance_edge=bool(self.appearance[index]),
        )

    def subset(self, indices) -> "PatchSet":
        indices = np.asarray(indices)
        return PatchSet(
            data=self.data[indices],
            labels=self.labels[indices],
            frame_ids=self.frame_ids[indices],
            rows=self.rows[indices],
            cols=self.cols[indices],
            appearance=self.appearance[indices],
            channels=self.channels,
        )

    def with_data(self, data: np.ndarray) -> "PatchSet":
        return PatchSet(data=data, labels=self.labels, frame_ids=self.frame_ids, rows=self.rows,
                        cols=self.cols, appearance=self.appearance, channels=self.channels)

    @property
    def positives(self) -> int:
        return int(np.count_nonzero(self.labels == PatchLabel.OCCLUSION))

    def frames(self) -> Set[int]:
        return set(int(f) for f in np.unique(self.frame_ids))


@dataclass(frozen=True)
class SplitSpec:
    """
    Contiguous train/test division of a trajectory.

    Attributes:
        train_fraction: Share of frames used for training, in (0, 1)
        boundary: Explicit first test frame index; derived from train_fraction when None
    """
    train_fraction: float = 0.7
    boundary: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")

    def resolve(self, frame_count: int) -> int:
        if self.boundary is not None:
            return self.boundary
        return int(round(self.train_fraction * frame_count))


class NormalizationStats(BaseModel):
    """Per-channel means of the training patches, in scaled units"""
    channels: int = Field(..., description="Channel count the stats were computed for")
    means: List[float] = Field(..., description="Mean per channel")
    patch_count: int = Field(0, ge=0, description="Training patches the means were computed over")

    @field_validator("channels")
    @classmethod
    def supported_channels(cls, value: int) -> int:
        if value not in (3, 4):
            raise ValueError(f"unsupported channel count {value}")
        return value

    @model_validator(mode="after")
    def one_mean_per_channel(self) -> "NormalizationStats":
        if len(self.means) != self.channels:
            raise ValueError(f"{len(self.means)} means for {self.channels} channels")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.means, dtype=np.float32).reshape(-1, 1, 1)
