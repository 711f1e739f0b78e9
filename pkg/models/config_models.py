"""
Run Configuration Models

Pydantic blocks for every configurable stage plus the key-value config file
reader. Validation failures surface as ConfigError.
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from utils.constants import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_EXTRACT_STRIDE,
    DEFAULT_FWHM,
    DEFAULT_L2,
    DEFAULT_LR,
    DEFAULT_MAJORITY,
    DEFAULT_MAX_INVALID_FRACTION,
    DEFAULT_MOMENTUM,
    DEFAULT_SWEEP_STRIDE,
    DEFAULT_TAU_DEPTH,
    PATCH_SIZE,
)
from utils.errors import ConfigError


def describe_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


class ConfigModel(BaseModel):
    """Base for configuration blocks: immutable, unknown keys rejected"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    def __init__(self, **data: Any):
        try:
            super().__init__(**data)
        except ValidationError as e:
            raise ConfigError(f"invalid {type(self).__name__}: {describe_validation_error(e)}") from e

    def updated(self, **changes: Any):
        """Copy with changes, validated again."""
        return type(self)(**{**self.model_dump(), **changes})


def _supported_channels(value: int) -> int:
    if value not in (3, 4):
        raise ValueError(f"channels must be 3 or 4, got {value}")
    return value


class DatasetConfig(ConfigModel):
    """Label generation and patch extraction parameters"""
    tau_depth: float = Field(DEFAULT_TAU_DEPTH, gt=0, description="Depth discontinuity threshold in meters")
    max_invalid_fraction: float = Field(DEFAULT_MAX_INVALID_FRACTION, ge=0, le=1)
    stride: int = Field(DEFAULT_EXTRACT_STRIDE, ge=1, description="Extraction grid stride")
    majority: int = Field(DEFAULT_MAJORITY, ge=1, le=4, description="Center-block occlusion pixels for a positive patch")
    train_fraction: float = Field(0.7, gt=0, lt=1)
    split_boundary: Optional[int] = Field(None, ge=1, description="First test frame; overrides train_fraction")
    balance: Optional[float] = Field(None, gt=0, description="Max negatives per positive kept in the train cache")
    channels: int = Field(4, description="3 (RGB) or 4 (RGB-D)")

    @field_validator("channels")
    @classmethod
    def supported_channels(cls, value: int) -> int:
        return _supported_channels(value)


class TrainConfig(ConfigModel):
    """SGD regime; defaults are the reference hyper-parameters"""
    batch_size: int = Field(DEFAULT_BATCH_SIZE, ge=1)
    lr: float = Field(DEFAULT_LR, gt=0)
    momentum: float = Field(DEFAULT_MOMENTUM, ge=0, lt=1)
    l2: float = Field(DEFAULT_L2, ge=0)
    epochs: int = Field(30, ge=0)
    shuffle_seed: int = 0
    channels: int = Field(4, description="3 (RGB) or 4 (RGB-D)")
    l2_on_output: bool = True
    checkpoint_every: int = Field(0, ge=0, description="Save a checkpoint every N epochs, 0 disables")
    test_subsample: Optional[int] = Field(None, ge=1, description="Patches drawn per epoch for test error")
    train_subsample: Optional[int] = Field(None, ge=1, description="Patches drawn per epoch for train error")

    @field_validator("channels")
    @classmethod
    def supported_channels(cls, value: int) -> int:
        return _supported_channels(value)


class FusionMode(str, Enum):
    NORMALIZED = "normalized"
    SUM = "sum"


class FusionConfig(ConfigModel):
    """Frame sweep and kernel fusion parameters"""
    sweep_stride: int = Field(DEFAULT_SWEEP_STRIDE, ge=1, description="Pixels between patch positions")
    fwhm: float = Field(DEFAULT_FWHM, gt=0, description="Kernel full width at half maximum in pixels")
    patch_size: int = Field(PATCH_SIZE, description="Fixed by the network input")
    mode: FusionMode = FusionMode.NORMALIZED
    threshold: Optional[float] = Field(None, gt=0, lt=1, description="Binarization threshold for mask output")
    batch_size: int = Field(256, ge=1, description="Patches classified per forward call")

    @model_validator(mode="after")
    def stride_within_patch(self) -> "FusionConfig":
        if self.patch_size != PATCH_SIZE:
            raise ValueError(f"patch_size is fixed at {PATCH_SIZE}")
        if self.sweep_stride > self.patch_size:
            raise ValueError(f"sweep_stride {self.sweep_stride} exceeds patch size {self.patch_size}")
        return self


class RunConfig(ConfigModel):
    """Everything a CLI command ran with; persisted as run_config.json"""
    command: str = ""
    seed: int = 0
    threads: int = Field(0, ge=0)
    deterministic: bool = False
    log_level: str = "INFO"
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    strides: Tuple[int, ...] = ()
    paths: Dict[str, str] = Field(default_factory=dict)


_SECTIONS = {"dataset", "train", "fusion", "paths"}
_TOP_LEVEL = set(RunConfig.model_fields) - _SECTIONS


def _coerce(raw: str) -> Union[str, list]:
    value = raw.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    if "," in value:
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parse 'key = value' lines into a nested dict.

    Dotted keys address sections ('train.epochs = 30'); '#' starts a comment;
    comma-separated values become lists. Errors carry the line number.
    """
    nested: Dict[str, Any] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got '{line}'", line=line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"empty key or value in '{line}'", line=line_no)
        parts = key.split(".")
        if len(parts) == 1:
            if key not in _TOP_LEVEL:
                raise ConfigError(f"unknown key '{key}'", line=line_no)
            nested[key] = _coerce(value)
        elif len(parts) == 2 and parts[0] in _SECTIONS:
            nested.setdefault(parts[0], {})[parts[1]] = _coerce(value)
        else:
            raise ConfigError(f"unknown key '{key}'", line=line_no)
    return nested


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def merge_layers(*layers: Dict[str, Any]) -> Dict[str, Any]:
    """Merge nested dicts left to right; later layers win, None values are skipped."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        for key, value in layer.items():
            if value is None:
                continue
            if isinstance(value, dict):
                merged[key] = merge_layers(merged.get(key, {}), value)
            else:
                merged[key] = value
    return merged


def resolve_run_config(file_values: Dict[str, Any], cli_values: Dict[str, Any]) -> RunConfig:
    """CLI flags over config file keys over model defaults; train.shuffle_seed follows seed unless set."""
    merged = merge_layers(file_values, cli_values)
    sections = {name: merged.pop(name) for name in ("dataset", "train", "fusion") if name in merged}
    if "seed" in merged:
        sections.setdefault("train", {}).setdefault("shuffle_seed", merged["seed"])
    blocks = {
        "dataset": DatasetConfig(**sections.get("dataset", {})),
        "train": TrainConfig(**sections.get("train", {})),
        "fusion": FusionConfig(**sections.get("fusion", {})),
    }
    if isinstance(merged.get("strides"), (str, int)):
        merged["strides"] = [merged["strides"]]
    return RunConfig(**merged, **blocks)
