"""
Training Package

SGD training loop and patch classification.
"""

from .trainer_service import classify, classify_batch, error_rate, predict_labels, train

__all__ = [
    "train",
    "classify",
    "classify_batch",
    "predict_labels",
    "error_rate",
]
