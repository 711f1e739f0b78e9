"""
Tensor Core Models

Shape descriptors used by the differentiable primitives. Tensors themselves
are plain numpy arrays laid out channels x height x width, with an optional
leading batch extent.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from utils.errors import ConfigError, ShapeError


@dataclass(frozen=True)
class ConvSpec:
    """
    Convolution layer geometry.

    Attributes:
        in_channels: Channels of the input tensor
        out_channels: Number of filters
        kernel: Square kernel size in pixels
        stride: Filter step in pixels
        padding: Zero padding added on every edge
    """
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        for name in ("in_channels", "out_channels", "kernel", "stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"ConvSpec.{name} must be positive, got {getattr(self, name)}")
        if self.padding < 0:
            raise ConfigError(f"ConvSpec.padding must be non-negative, got {self.padding}")

    def output_extent(self, extent: int, dimension: str = "spatial extent") -> int:
        """floor((in + 2*padding - kernel) / stride) + 1, which must be >= 1."""
        span = extent + 2 * self.padding - self.kernel
        if span < 0:
            raise ShapeError(dimension, f">= {self.kernel - 2 * self.padding}", extent, op="conv2d")
        return span // self.stride + 1

    def output_shape(self, height: int, width: int) -> Tuple[int, int, int]:
        return (
            self.out_channels,
            self.output_extent(height, "height"),
            self.output_extent(width, "width"),
        )

    @property
    def weight_shape(self) -> Tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel, self.kernel)


@dataclass(frozen=True)
class PoolMask:
    """
    Winning positions of a 2x2 max pooling pass.

    Attributes:
        argmax: Row-major index (0..3) of the maximum inside each window,
            shaped like the pooled output
        input_shape: Shape of the pooled input
    """
    argmax: np.ndarray
    input_shape: Tuple[int, ...]
