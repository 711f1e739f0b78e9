"""
Inference API

Serves the model named by OCCLUSION_MODEL_PATH / OCCLUSION_STATS_PATH.
Without one the app still starts; inference routes answer 503.
"""

import logging

from fastapi import FastAPI

from api.models.inference_models import StatusResponse
from api.routes.inference import inference_router
from services.service_registry import service_registry
from utils.config import get_settings
from utils.logging_config import system_logging

logger = logging.getLogger(__name__)

app = FastAPI(title="Occlusion Edge CNN API")


@app.on_event("startup")
async def startup_event():
    """Initialize logging and load the served model."""
    settings = get_settings()
    try:
        system_logging(settings=settings)
    except OSError as e:
        # Log directory not writable; keep console logging
        logging.basicConfig(level=logging.INFO)
        logger.error(f"Failed to configure file logging: {e}")

    if settings.model_path and settings.stats_path:
        service_registry.load(settings.model_path, settings.stats_path)
    else:
        logger.warning("No model configured; inference endpoints will answer 503")


@app.get("/health")
async def health_check():
    return {"status": "ok"}


@app.get("/status", response_model=StatusResponse)
async def status_check() -> StatusResponse:
    model = service_registry.get_model()
    return StatusResponse(
        status="running",
        model_loaded=service_registry.is_initialized(),
        channels=model.channels if model is not None else None,
    )


app.include_router(inference_router)
