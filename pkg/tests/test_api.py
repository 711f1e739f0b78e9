"""Tests for the inference HTTP surface."""

import numpy as np
import pytest
import pytest_asyncio
from httpx import ASGITransport, AsyncClient

from api.api import app
from models.frame_models import NormalizationStats
from services.dataset.tum_io import depth_to_raw, read_gray, write_png
from services.service_registry import service_registry

STATS = NormalizationStats(channels=4, means=[0.5, 0.5, 0.5, 2.0], patch_count=10)


@pytest_asyncio.fixture
async def client():
    service_registry.clear()
    async with AsyncClient(transport=ASGITransport(app=app), base_url="http://test") as ac:
        yield ac
    service_registry.clear()


@pytest.fixture
def served(small_model):
    service_registry.set_model(small_model, STATS)
    return small_model


@pytest.fixture
def image_pair(tmp_path, rng):
    rgb_path, depth_path = tmp_path / "rgb.png", tmp_path / "depth.png"
    write_png(rgb_path, rng.integers(0, 256, size=(64, 96, 3), dtype=np.uint8))
    write_png(depth_path, depth_to_raw(rng.uniform(0.5, 4.0, size=(64, 96)).astype(np.float32)))
    return str(rgb_path), str(depth_path)


@pytest.mark.asyncio
async def test_health(client):
    response = await client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


@pytest.mark.asyncio
async def test_status_without_model(client):
    data = (await client.get("/status")).json()
    assert data["model_loaded"] is False and data["channels"] is None


@pytest.mark.asyncio
async def test_status_with_model(client, served):
    data = (await client.get("/status")).json()
    assert data["model_loaded"] is True and data["channels"] == 4


class TestClassify:
    @pytest.mark.asyncio
    async def test_no_model(self, client):
        response = await client.post("/inference/classify", json={"patch": np.zeros((4, 32, 32)).tolist()})
        assert response.status_code == 503

    @pytest.mark.asyncio
    async def test_classify(self, client, served, rng):
        patch = rng.uniform(0, 1, size=(4, 32, 32))
        response = await client.post("/inference/classify", json={"patch": patch.tolist()})
        assert response.status_code == 200
        data = response.json()
        assert data["label"] in (0, 1)
        assert 0.0 <= data["confidence"] <= 1.0
        assert data["label"] == int(data["confidence"] > 0.5)

    @pytest.mark.asyncio
    async def test_wrong_channels(self, client, served):
        response = await client.post("/inference/classify", json={"patch": np.zeros((3, 32, 32)).tolist()})
        assert response.status_code == 422
        assert "expects" in response.json()["detail"]

    @pytest.mark.asyncio
    async def test_ragged_patch(self, client, served):
        response = await client.post("/inference/classify", json={"patch": [[[0.0, 1.0], [0.0]]]})
        assert response.status_code == 422


class TestFrame:
    @pytest.mark.asyncio
    async def test_missing_image(self, client, served, tmp_path):
        response = await client.post("/inference/frame", json={"rgb_path": str(tmp_path / "a.png"),
                                                               "depth_path": str(tmp_path / "b.png")})
        assert response.status_code == 404
        assert "rgb image not found" in response.json()["detail"]

    @pytest.mark.asyncio
    async def test_heatmap_written(self, client, served, image_pair, tmp_path):
        rgb_path, depth_path = image_pair
        out = tmp_path / "out"
        response = await client.post("/inference/frame", json={
            "rgb_path": rgb_path, "depth_path": depth_path, "stride": 16, "fwhm": 8.0,
            "threshold": 0.5, "output_dir": str(out),
        })
        assert response.status_code == 200
        data = response.json()
        assert data["patch_count"] == 15
        assert data["heatmap_path"].endswith("heatmap_rgb_s16.png")
        assert read_gray(data["heatmap_path"]).shape == (64, 96)
        assert (out / "heatmap_rgb_s16_color.png").is_file()
        assert data["mask_path"] is not None and (out / "mask_rgb_s16.png").is_file()

    @pytest.mark.asyncio
    async def test_invalid_stride(self, client, served, image_pair):
        rgb_path, depth_path = image_pair
        response = await client.post("/inference/frame", json={"rgb_path": rgb_path, "depth_path": depth_path,
                                                               "stride": 40})
        assert response.status_code == 422
