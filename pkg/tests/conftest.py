#!/usr/bin/env python3
"""
Pytest configuration and fixtures for the test suite.

Fixtures here build the small synthetic scenes, toy networks and patch sets
shared by the service, CLI and API tests.
"""

import logging
import os
import sys
from typing import Optional

import numpy as np
import pytest

# Add the project root to the path for imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from models.frame_models import PatchLabel, PatchSet  # noqa: E402
from models.scene_models import RectKind, SceneRect, SceneSpec  # noqa: E402
from services.network import init_model  # noqa: E402
from utils.config import reset_settings  # noqa: E402
from utils.parallel import SEQUENTIAL  # noqa: E402

SMALL_SCENE_TEXT = """\
# one occluder and one painted patch over a 3 m wall
size 64 96
frames 4
background 3.0
seed 7
box 12 10 30 24 1.0 1 1
paint 16 56 28 24
"""


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch):
    """No log files, fresh settings and the original root handlers for every test."""
    monkeypatch.setenv("OCCLUSION_LOG_FILE", "")
    monkeypatch.setenv("OCCLUSION_THREADS", "1")
    monkeypatch.delenv("OCCLUSION_MODEL_PATH", raising=False)
    monkeypatch.delenv("OCCLUSION_STATS_PATH", raising=False)
    reset_settings()
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    reset_settings()
    for handler in list(root.handlers):
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    for handler in handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(level)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sequential():
    return SEQUENTIAL


@pytest.fixture
def toy_model():
    """2-2-4 filters on 8x8 inputs in float64, for gradient checks."""
    return init_model(4, rng_seed=3, filters=(2, 2, 4), input_size=8, dtype=np.float64)


@pytest.fixture
def small_model():
    """Full 32x32 input with few filters; cheap enough for service tests."""
    return init_model(4, rng_seed=5, filters=(2, 2, 4))


@pytest.fixture
def small_scene_text():
    return SMALL_SCENE_TEXT


@pytest.fixture
def small_scene():
    return SceneSpec(
        height=64,
        width=96,
        frames=4,
        background_depth=3.0,
        seed=7,
        rects=(
            SceneRect(kind=RectKind.BOX, row=12, col=10, height=30, width=24, depth=1.0,
                      velocity=(1.0, 1.0), line=6),
            SceneRect(kind=RectKind.PAINT, row=16, col=56, height=28, width=24, line=7),
        ),
    )


def make_patch_set(count: int, channels: int = 4, frame_id: int = 0, seed: int = 0,
                   positives: Optional[int] = None) -> PatchSet:
    """Random patches; the first `positives` (default half) are Occlusion."""
    generator = np.random.default_rng(seed)
    positives = count // 2 if positives is None else positives
    labels = np.array([PatchLabel.OCCLUSION] * positives + [PatchLabel.NO_OCCLUSION] * (count - positives),
                      dtype=np.uint8)
    return PatchSet(
        data=generator.uniform(-1, 1, size=(count, channels, 32, 32)).astype(np.float32),
        labels=labels,
        frame_ids=np.full(count, frame_id, dtype=np.int32),
        rows=np.arange(count, dtype=np.int32),
        cols=np.zeros(count, dtype=np.int32),
        channels=channels,
    )


@pytest.fixture
def patch_factory():
    return make_patch_set
