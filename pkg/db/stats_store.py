"""Normalization stats JSON: {"channels": C, "means": [...], "patch_count": N}"""

import logging
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from models.frame_models import NormalizationStats
from utils.errors import ArtifactNotFoundError, DataError

logger = logging.getLogger(__name__)


def save_stats(stats: NormalizationStats, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(stats.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Saved normalization stats for {stats.channels} channels to {path}")
    return path


def load_stats(path: Union[str, Path]) -> NormalizationStats:
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError("stats file", path)
    try:
        return NormalizationStats.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataError(f"invalid stats file {path}: {e}") from e
