import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import REFERENCE_SAMPLE
from outlierkit.cache import cache_read
from outlierkit.service import ServiceSettings, create_app


@pytest.fixture()
def client(tmp_path):
    settings = ServiceSettings(cache_path=tmp_path / "cache.tsv")
    with TestClient(create_app(settings)) as c:
        yield c


def detect_payload(**overrides):
    payload = {
        "values": list(REFERENCE_SAMPLE),
        "method": "bp",
        "family": "normal",
        "side": "two",
        "alpha": 0.05,
        "critical_replicates": 50_000,
        "seed": 11,
    }
    payload.update(overrides)
    return payload


def test_health_and_families(client):
    health = client.get("/health").json()
    assert health["status"] == "ok"
    assert health["cache_entries"] == 0
    families = client.get("/families").json()
    assert {f["name"] for f in families} == {
        "normal", "extreme_value_i", "extreme_value_ii", "logistic", "laplace", "cauchy",
    }
    cauchy = next(f for f in families if f["name"] == "cauchy")
    assert cauchy["gamma_class"] == "frechet"


def test_detect_reference_sample(client):
    res = client.post("/detect", json=detect_payload())
    assert res.status_code == 200
    body = res.json()
    assert body["decision"] == "outliers_found"
    assert body["outliers"] == [1, 2, 3, 17, 18, 19, 20]
    assert body["outliers_right"] == [1, 2, 3]
    assert body["outliers_left"] == [17, 18, 19, 20]
    assert len(body["steps"]) == 4
    assert body["steps"][3]["d"] == 4
    assert body["fit"]["estimator"] == "med_qn"
    assert body["config"]["alpha"] == 0.05
    assert body["critical_values"][0]["cached"] is False
    by_index = {o["index"]: o for o in body["observations"]}
    assert by_index[20]["classification"] == "left"
    assert by_index[4]["classification"] == "none"


def test_detect_uses_cache_on_second_call(client, tmp_path):
    first = client.post("/detect", json=detect_payload()).json()
    assert first["critical_values"][0]["cached"] is False
    second = client.post("/detect", json=detect_payload()).json()
    assert second["critical_values"][0]["cached"] is True
    assert second["critical_values"][0]["value"] == first["critical_values"][0]["value"]
    table = cache_read(tmp_path / "cache.tsv")
    assert len(table) == 1


def test_detect_small_sample_refused_without_force(client):
    values = list(np.random.default_rng(3).standard_normal(14))
    res = client.post("/detect", json=detect_payload(values=values))
    assert res.status_code == 400
    assert "force" in res.json()["detail"]
    res = client.post("/detect", json=detect_payload(values=values, force=True))
    assert res.status_code == 200
    assert any("below 20" in w for w in res.json()["warnings"])


def test_detect_moderately_small_sample_warns(client):
    values = list(np.random.default_rng(5).standard_normal(18))
    res = client.post("/detect", json=detect_payload(values=values))
    assert res.status_code == 200
    assert any("below 20" in w for w in res.json()["warnings"])


def test_detect_rosner_requires_s(client):
    res = client.post("/detect", json=detect_payload(method="rosner", values=list(np.arange(50.0))))
    assert res.status_code == 400
    assert "0.4" in res.json()["detail"]


def test_detect_rosner_with_s(client):
    rng = np.random.default_rng(7)
    values = rng.standard_normal(50)
    values[3] = 50.0
    res = client.post(
        "/detect", json=detect_payload(method="rosner", values=list(values), s=5)
    )
    assert res.status_code == 200
    assert res.json()["outliers"] == [4]


def test_detect_shape_scale_rejects_nonpositive(client):
    values = list(np.exp(np.random.default_rng(9).standard_normal(25)))
    values[6] = -1.0
    res = client.post("/detect", json=detect_payload(values=values, shape_scale=True))
    assert res.status_code == 422
    assert "observation 7" in res.json()["detail"]


def test_detect_shape_scale_matches_location_scale(client):
    values = list(np.exp(np.asarray(REFERENCE_SAMPLE) + 25.0))
    res = client.post("/detect", json=detect_payload(values=values, shape_scale=True))
    assert res.status_code == 200
    assert res.json()["outliers"] == [1, 2, 3, 17, 18, 19, 20]


def test_detect_validation_errors(client):
    res = client.post("/detect", json=detect_payload(alpha=1.5))
    assert res.status_code == 422
    res = client.post("/detect", json=detect_payload(method="grubbs"))
    assert res.status_code == 422
    res = client.post("/detect", json=detect_payload(labels=[1, 2, 3]))
    assert res.status_code == 422
    res = client.post("/detect", json=detect_payload(estimator="ml"))
    assert res.status_code == 400
    assert "dg" in res.json()["detail"]


def test_critical_values_endpoint_caches(client):
    payload = {
        "method": "bp",
        "family": "normal",
        "s": 5,
        "alpha": 0.05,
        "side": "two",
        "replicates": 50_000,
        "seed": 13,
    }
    first = client.post("/critical-values", json=payload).json()
    assert first["n"] is None
    assert first["cached"] is False
    assert 0.97 < first["value"] < 0.995
    second = client.post("/critical-values", json=payload).json()
    assert second["cached"] is True
    assert second["value"] == first["value"]


def test_critical_values_dg_requires_n(client):
    res = client.post("/critical-values", json={"method": "dg", "family": "normal", "alpha": 0.05})
    assert res.status_code == 400


def test_critical_values_hawkins(client):
    payload = {
        "method": "hawkins",
        "family": "normal",
        "n": 40,
        "s": 5,
        "alpha": 0.05,
        "side": "right",
        "replicates": 20_000,
        "seed": 15,
    }
    res = client.post("/critical-values", json=payload)
    assert res.status_code == 200
    assert res.json()["value"] > 0.0


def test_experiments_endpoint(client):
    payload = {
        "cells": [
            {
                "method": "bp",
                "family": "normal",
                "n": 30,
                "r": 2,
                "contaminant": {"kind": "exponential", "theta": 5.0},
            },
            {
                "method": "rosner",
                "family": "normal",
                "n": 30,
                "r": 2,
                "contaminant": {"kind": "exponential", "theta": 5.0},
            },
        ],
        "replicates": 25,
        "seed": 17,
        "critical_replicates": 20_000,
    }
    res = client.post("/experiments", json=payload)
    assert res.status_code == 200
    rows = res.json()["rows"]
    assert len(rows) == 2
    ok = rows[0]
    assert ok["error"] is None
    assert ok["d_oo"] + ok["d_on"] == pytest.approx(2.0)
    assert ok["param"] == "theta=5"
    # rosner without s: recorded as a per-cell error, run continues
    assert rows[1]["error"] is not None
    assert rows[1]["d_oo"] is None


def test_significance_curve_endpoint(client):
    payload = {
        "method": "bp",
        "family": "normal",
        "n_grid": [30, 40],
        "alpha": 0.05,
        "replicates": 30,
        "seed": 19,
        "critical_replicates": 20_000,
    }
    res = client.post("/significance-curve", json=payload)
    assert res.status_code == 200
    points = res.json()["points"]
    assert [p["n"] for p in points] == [30, 40]
    assert all(0.0 <= p["significance"] <= 1.0 for p in points)
