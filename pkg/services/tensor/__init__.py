"""
Tensor Core Package

Dense-tensor primitives (convolution, pooling, ReLU, fully connected,
softmax cross-entropy) with exact backward passes.
"""

from models.tensor_models import ConvSpec, PoolMask
from .ops import (
    check_finite,
    conv2d_forward,
    conv2d_backward,
    maxpool2_forward,
    maxpool2_backward,
    relu_forward,
    relu_backward,
    fc_forward,
    fc_backward,
    softmax,
    softmax_xent,
)

__all__ = [
    "ConvSpec",
    "PoolMask",
    "check_finite",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool2_forward",
    "maxpool2_backward",
    "relu_forward",
    "relu_backward",
    "fc_forward",
    "fc_backward",
    "softmax",
    "softmax_xent",
]
