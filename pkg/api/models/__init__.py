from .inference_models import (
    ClassifyRequest,
    ClassifyResponse,
    FrameRequest,
    FrameResponse,
    StatusResponse,
)

__all__ = [
    'ClassifyRequest',
    'ClassifyResponse',
    'FrameRequest',
    'FrameResponse',
    'StatusResponse',
]
