from .inference import inference_router

__all__ = ['inference_router']
