"""
Patch cache files (.npz).

Keys: format_version, channels, data, labels, frame_ids, rows, cols, appearance.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from models.frame_models import PatchSet
from utils.errors import ArtifactNotFoundError, DataError

logger = logging.getLogger(__name__)

PATCH_FORMAT_VERSION = 1
_KEYS = ("format_version", "channels", "data", "labels", "frame_ids", "rows", "cols", "appearance")


def save_patches(patches: PatchSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        np.savez_compressed(
            f,
            format_version=np.int32(PATCH_FORMAT_VERSION),
            channels=np.int32(patches.channels),
            data=patches.data.astype(np.float32),
            labels=patches.labels.astype(np.uint8),
            frame_ids=patches.frame_ids.astype(np.int32),
            rows=patches.rows.astype(np.int32),
            cols=patches.cols.astype(np.int32),
            appearance=patches.appearance.astype(bool),
        )
    logger.info(f"Saved {len(patches)} patches ({patches.positives} occlusion) to {path}")
    return path


def load_patches(path: Union[str, Path]) -> PatchSet:
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError("patch cache", path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            missing = [key for key in _KEYS if key not in archive.files]
            if missing:
                raise DataError(f"patch cache {path} is missing {missing}")
            version = int(archive["format_version"])
            if version != PATCH_FORMAT_VERSION:
                raise DataError(f"patch cache {path} has format version {version}, "
                                f"expected {PATCH_FORMAT_VERSION}")
            patches = PatchSet(
                data=archive["data"],
                labels=archive["labels"],
                frame_ids=archive["frame_ids"],
                rows=archive["rows"],
                cols=archive["cols"],
                appearance=archive["appearance"],
                channels=int(archive["channels"]),
            )
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read patch cache {path}: {e}") from e
    logger.debug(f"Loaded {len(patches)} patches from {path}")
    return patches
