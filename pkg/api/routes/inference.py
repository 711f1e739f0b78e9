"""
Inference API Routes

Patch classification and full-frame heatmap inference against the model in
the service registry.
"""

import logging
from pathlib import Path
from typing import Tuple

import numpy as np
from fastapi import APIRouter, Depends, HTTPException
from fastapi.concurrency import run_in_threadpool

from api.models.inference_models import ClassifyRequest, ClassifyResponse, FrameRequest, FrameResponse
from models.config_models import FusionConfig
from models.frame_models import NormalizationStats
from models.network_models import CnnModel
from services.dataset import load_frame, normalize_tensor
from services.fusion import binarize, infer_frame, render, write_mask
from services.service_registry import service_registry
from services.training import classify
from utils.config import get_settings
from utils.constants import DEFAULT_FWHM, PATCH_SIZE
from utils.errors import ArtifactNotFoundError, ConfigError, DataError

logger = logging.getLogger(__name__)

inference_router = APIRouter(prefix="/inference", tags=["inference"])


# Dependency injection
async def get_served_model() -> Tuple[CnnModel, NormalizationStats]:
    """Get the loaded model and stats from the registry"""
    if not service_registry.is_initialized():
        raise HTTPException(
            status_code=503,
            detail="No model loaded. Set OCCLUSION_MODEL_PATH and OCCLUSION_STATS_PATH and restart the server."
        )
    return service_registry.get_model(), service_registry.get_stats()


@inference_router.post("/classify", response_model=ClassifyResponse)
async def classify_patch(
    request: ClassifyRequest,
    served: Tuple[CnnModel, NormalizationStats] = Depends(get_served_model)
) -> ClassifyResponse:
    """
    Classify one 32x32 patch

    Args:
        request: Patch in scaled units; normalization is applied here

    Returns:
        Argmax label and occlusion confidence
    """
    model, stats = served
    try:
        patch = np.asarray(request.patch, dtype=np.float32)
    except ValueError:
        raise HTTPException(status_code=422, detail="patch must be a rectangular C x 32 x 32 array")
    expected = (model.channels, PATCH_SIZE, PATCH_SIZE)
    if patch.shape != expected:
        raise HTTPException(status_code=422, detail=f"patch shape {patch.shape}, model expects {expected}")

    label, confidence = await run_in_threadpool(classify, model, normalize_tensor(patch, stats))
    return ClassifyResponse(label=int(label), confidence=confidence)


@inference_router.post("/frame", response_model=FrameResponse)
async def infer_frame_heatmap(
    request: FrameRequest,
    served: Tuple[CnnModel, NormalizationStats] = Depends(get_served_model)
) -> FrameResponse:
    """
    Sweep a frame and write its fused heatmap

    Args:
        request: Image paths and fusion parameters

    Returns:
        Patch count, wall time and written file paths
    """
    model, stats = served
    settings = get_settings()
    try:
        cfg = FusionConfig(
            sweep_stride=request.stride or settings.api_default_stride,
            fwhm=request.fwhm or DEFAULT_FWHM,
            mode=request.mode,
        )
        frame = await run_in_threadpool(load_frame, request.rgb_path, request.depth_path)
        heatmap, patch_count, wall_time = await run_in_threadpool(infer_frame, model, frame, stats, cfg)
    except ArtifactNotFoundError as e:
        raise HTTPException(status_code=404, detail=str(e))
    except (ConfigError, DataError) as e:
        raise HTTPException(status_code=422, detail=str(e))

    out_dir = Path(request.output_dir or settings.api_output_dir)
    stem = f"{Path(request.rgb_path).stem}_s{cfg.sweep_stride}"
    heatmap_path = out_dir / f"heatmap_{stem}.png"
    false_color_path = out_dir / f"heatmap_{stem}_color.png"
    mask_path = None
    try:
        render(heatmap, heatmap_path, false_color_path)
        if request.threshold is not None:
            mask_path = out_dir / f"mask_{stem}.png"
            write_mask(binarize(heatmap, request.threshold), mask_path)
    except DataError as e:
        logger.error(f"Failed to write inference outputs: {e}")
        raise HTTPException(status_code=500, detail=str(e))

    return FrameResponse(
        patch_count=patch_count,
        wall_time=wall_time,
        heatmap_path=str(heatmap_path),
        false_color_path=str(false_color_path),
        mask_path=str(mask_path) if mask_path else None,
    )
