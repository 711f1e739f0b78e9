"""
API Models for Inference

Request and response models of the inference endpoints.
"""

from typing import List, Optional

from pydantic import BaseModel, Field

from models.config_models import FusionMode


class ClassifyRequest(BaseModel):
    """A single patch in scaled units (RGB in [0, 1], depth in meters), not normalized"""
    patch: List[List[List[float]]] = Field(..., description="C x 32 x 32 nested list")


class ClassifyResponse(BaseModel):
    label: int = Field(..., description="0 = no occlusion, 1 = occlusion")
    confidence: float = Field(..., ge=0, le=1, description="Softmax probability of the occlusion class")


class FrameRequest(BaseModel):
    """Sweep one registered RGB-D pair from disk"""
    rgb_path: str = Field(..., min_length=1)
    depth_path: str = Field(..., min_length=1)
    stride: Optional[int] = Field(None, ge=1, le=32, description="Sweep stride, server default when omitted")
    fwhm: Optional[float] = Field(None, gt=0, description="Kernel full width at half maximum in pixels")
    mode: FusionMode = FusionMode.NORMALIZED
    threshold: Optional[float] = Field(None, gt=0, lt=1, description="Also write a binary mask")
    output_dir: Optional[str] = Field(None, description="Directory for the heatmap PNGs")


class FrameResponse(BaseModel):
    patch_count: int
    wall_time: float
    heatmap_path: str
    false_color_path: str
    mask_path: Optional[str] = None


class StatusResponse(BaseModel):
    status: str
    model_loaded: bool
    channels: Optional[int] = None
