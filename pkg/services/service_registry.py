"""
Service Registry for Dependency Injection

Holds the model and normalization stats loaded for the HTTP surface so the
route handlers share one instance.
"""

import logging
from pathlib import Path
from typing import Optional, Union

from db.model_store import load_model
from db.stats_store import load_stats
from models.frame_models import NormalizationStats
from models.network_models import CnnModel
from utils.errors import OcclusionError

logger = logging.getLogger(__name__)


class ServiceRegistry:
    """Singleton registry for the served model"""

    _instance: Optional['ServiceRegistry'] = None
    _model: Optional[CnnModel] = None
    _stats: Optional[NormalizationStats] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def set_model(self, model: CnnModel, stats: NormalizationStats):
        """Register a model with the stats its inputs are normalized by"""
        if model.channels != stats.channels:
            raise OcclusionError(f"model expects {model.channels} channels, stats cover {stats.channels}")
        self._model = model
        self._stats = stats

    def get_model(self) -> Optional[CnnModel]:
        return self._model

    def get_stats(self) -> Optional[NormalizationStats]:
        return self._stats

    def is_initialized(self) -> bool:
        """Check that a model and its stats are loaded"""
        return self._model is not None and self._stats is not None

    def load(self, model_path: Union[str, Path], stats_path: Union[str, Path]) -> bool:
        """
        Load artifacts from disk; on failure the registry keeps no model.

        Returns:
            True when a model is ready to serve
        """
        try:
            self.set_model(load_model(model_path), load_stats(stats_path))
        except OcclusionError as e:
            logger.error(f"Serving without a model: {e}")
            self.clear()
            return False
        logger.info(f"Serving {self._model.channels}-channel model from {model_path}")
        return True

    def clear(self):
        """Clear the registered model (useful for testing)"""
        self._model = None
        self._stats = None


# Global registry instance
service_registry = ServiceRegistry()
