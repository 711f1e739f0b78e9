"""
Network Models

Parameter containers for the occlusion CNN: three conv-pool pairs followed
by a two-way output layer, plus per-parameter momentum buffers.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.tensor_models import ConvSpec, PoolMask
from utils.constants import CONV_PADDING
from utils.errors import ConfigError

CONV_LAYERS = ("conv1", "conv2", "conv3")
OUTPUT_LAYER = "fc"
SUPPORTED_CHANNELS = (3, 4)


def param_names() -> List[str]:
    """Parameter names in layer order; also the model file table order."""
    names = []
    for layer in CONV_LAYERS + (OUTPUT_LAYER,):
        names.extend([f"{layer}.weight", f"{layer}.bias"])
    return names


@dataclass(frozen=True)
class InitSchedule:
    """
    Zero-mean Gaussian initialization.

    Attributes:
        conv_stds: Weight standard deviation per convolutional layer
        output_std: Weight standard deviation of the output layer
        bias_init: Constant bias value
    """
    conv_stds: Tuple[float, float, float] = (0.0001, 0.01, 0.01)
    output_std: float = 0.3
    bias_init: float = 0.0

    def __post_init__(self):
        if len(self.conv_stds) != len(CONV_LAYERS):
            raise ConfigError(f"InitSchedule needs {len(CONV_LAYERS)} conv stds, got {len(self.conv_stds)}")
        if any(std <= 0 for std in self.conv_stds) or self.output_std <= 0:
            raise ConfigError("InitSchedule standard deviations must be strictly positive")


@dataclass
class LayerCache:
    """Intermediates of one conv-relu-pool stage kept for the backward pass"""
    input: np.ndarray
    pre_activation: np.ndarray
    mask: PoolMask


@dataclass
class ChunkCache:
    """Forward intermediates of one fixed-size slice of the batch"""
    rows: slice
    stages: List[LayerCache]
    fc_input: np.ndarray


@dataclass
class ForwardCache:
    logits: np.ndarray
    chunks: List[ChunkCache]


@dataclass
class CnnModel:
    """
    Occlusion edge classifier.

    Attributes:
        channels: Input channels, 4 for RGB-D and 3 for RGB
        input_size: Spatial size of the square input patch
        params: Parameters keyed by "<layer>.weight" / "<layer>.bias", in layer order
        momentum: Momentum buffers, shape-congruent with params
        cache: Intermediates of the latest forward call
    """
    channels: int
    input_size: int
    params: Dict[str, np.ndarray]
    momentum: Dict[str, np.ndarray]
    cache: Optional[ForwardCache] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.channels not in SUPPORTED_CHANNELS:
            raise ConfigError(f"unsupported channel count {self.channels}, expected one of {SUPPORTED_CHANNELS}")
        if list(self.params) != param_names():
            raise ConfigError(f"model parameters must be {param_names()}, got {list(self.params)}")
        if list(self.momentum) != param_names():
            raise ConfigError("momentum buffers must mirror the parameter table")
        for name, value in self.params.items():
            if self.momentum[name].shape != value.shape:
                raise ConfigError(f"momentum buffer {name} has shape {self.momentum[name].shape}, "
                                  f"parameter has {value.shape}")

    @property
    def dtype(self) -> np.dtype:
        return self.params["conv1.weight"].dtype

    @property
    def filters(self) -> Tuple[int, int, int]:
        return tuple(self.params[f"{layer}.weight"].shape[0] for layer in CONV_LAYERS)

    @property
    def conv_specs(self) -> List[ConvSpec]:
        specs = []
        for layer in CONV_LAYERS:
            out_c, in_c, k, _ = self.params[f"{layer}.weight"].shape
            specs.append(ConvSpec(in_c, out_c, k, stride=1, padding=CONV_PADDING))
        return specs

    @property
    def num_classes(self) -> int:
        return self.params[f"{OUTPUT_LAYER}.weight"].shape[0]

    def is_decayed(self, name: str, l2_on_output: bool = True) -> bool:
        """Whether L2 applies to a parameter: weights only, output layer optional."""
        if not name.endswith(".weight"):
            return False
        return l2_on_output or not name.startswith(f"{OUTPUT_LAYER}.")

    def copy(self) -> "CnnModel":
        return CnnModel(
            channels=self.channels,
            input_size=self.input_size,
            params={k: v.copy() for k, v in self.params.items()},
            momentum={k: v.copy() for k, v in self.momentum.items()},
        )

    def num_parameters(self) -> int:
        return int(sum(v.size for v in self.params.values()))
