"""
Network Package

Assembly, initialization and training step of the occlusion CNN.
"""

from models.network_models import CnnModel, InitSchedule
from .network_service import (
    init_model,
    forward,
    backward,
    sgd_step,
    l2_penalty,
    predict_proba,
    fc_input_size,
)

__all__ = [
    "CnnModel",
    "InitSchedule",
    "init_model",
    "forward",
    "backward",
    "sgd_step",
    "l2_penalty",
    "predict_proba",
    "fc_input_size",
]
