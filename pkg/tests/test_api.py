# tests/test_api.py
import httpx
import pytest
from fastapi.testclient import TestClient

from app.main import app

client = TestClient(app)


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_create_phantom():
    response = client.post("/phantoms", json={"name": "disk", "n": 16})
    assert response.status_code == 200
    body = response.json()
    assert body["n"] == 16
    assert len(body["image"]) == 16
    assert {v for row in body["image"] for v in row} == {0.0, 1.0}


def test_unknown_phantom_is_rejected():
    response = client.post("/phantoms", json={"name": "nope", "n": 16})
    assert response.status_code == 400


def test_lattice_projection_and_reconstruction():
    image = [[1.0, 1.0], [0.0, 0.0]]
    geometry = {"kind": "lattice", "n": 2, "directions": "hv"}
    projected = client.post("/projections", json={"image": image, "geometry": geometry})
    assert projected.status_code == 200
    values = projected.json()["values"]
    assert sorted(values) == [0.0, 1.0, 1.0, 2.0]

    response = client.post("/reconstructions", json={
        "values": values, "geometry": geometry, "method": "dp", "truth": image,
    })
    assert response.status_code == 200
    body = response.json()
    assert body["image"] == image
    assert body["metrics"]["ji"] == 1.0


def test_reconstruction_rejects_wrong_length():
    geometry = {"kind": "lattice", "n": 2, "directions": "hv"}
    response = client.post("/reconstructions", json={"values": [1.0, 2.0], "geometry": geometry})
    assert response.status_code == 400


def test_enumeration_counts():
    response = client.post("/enumerations", json={"n": 2, "directions": "hv"})
    assert response.status_code == 200
    assert response.json()["table_row"]["unique"] == "14"


def test_enumeration_size_is_limited():
    response = client.post("/enumerations", json={"n": 4, "directions": "hv"})
    assert response.status_code == 422


@pytest.mark.asyncio
async def test_health_async():
    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://test") as ac:
        response = await ac.get("/health")
    assert response.status_code == 200
