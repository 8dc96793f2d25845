import json

import pytest
from fastapi.testclient import TestClient

from statgeo import schemas
from statgeo.api import app
from statgeo.cli import main

client = TestClient(app)

FLAT = {"spacetime": {"registry": {"name": "minkowski_static", "params": {"d": 2}}},
        "endpoints": {"x_p": [0, 0], "x_q": [1, 0], "t_q": 2}}


def test_spacetimes():
    r = client.get("/spacetimes")
    assert r.status_code == 200
    names = [e["name"] for e in r.json()]
    assert "excised_disk_static" in names


def test_solve_and_verify_round_trip():
    r = client.post("/solve", json=FLAT)
    assert r.status_code == 200
    rep = schemas.SolveResponse.model_validate(r.json())
    assert rep.exit_code == 0 and rep.best.J == pytest.approx(-1.5, abs=1e-6)
    r = client.post("/verify", json={"config": FLAT, "curve": rep.best_curve.model_dump()})
    assert r.status_code == 200 and r.json()["passed"]


def test_solve_without_geodesic_is_not_an_http_error():
    cfg = {"spacetime": {"registry": {"name": "excised_disk_static"}},
           "endpoints": {"x_p": [-1.05, 0], "x_q": [1.05, 0], "t_q": 0}}
    r = client.post("/solve", json=cfg)
    assert r.status_code == 200
    assert r.json()["exit_code"] == 2


def test_config_errors_are_400():
    cfg = {"spacetime": {"inline": {"g": [["1"]], "beta": "0", "delta": ["0"]}},
           "endpoints": {"x_p": [0], "x_q": [1], "t_q": 1}}
    r = client.post("/solve", json=cfg)
    assert r.status_code == 400
    body = schemas.ErrorResponse.model_validate(r.json())
    assert body.exit_code == 1 and "beta must be positive" in body.error


def test_schema_violations_are_422():
    r = client.post("/solve", json={"spacetime": {"registry": {"name": "x"}, "inline": {}}})
    assert r.status_code == 422


def test_lightlike_and_diagnose():
    cfg = {"spacetime": {"registry": {"name": "minkowski_skewed", "params": {"delta": "0.5"}}},
           "endpoints": {"x_p": [0], "x_q": [2], "t_q": 0}}
    r = client.post("/lightlike", json={"config": cfg})
    assert r.status_code == 200
    assert r.json()["arrival_time"] == pytest.approx(3.2360679775, abs=1e-9)
    r = client.post("/diagnose", json=cfg)
    assert r.status_code == 200
    assert r.json()["warnings"]


def test_timestamp_query_flag():
    assert client.post("/diagnose", json=FLAT).json()["created_at"] is None
    assert client.post("/diagnose?deterministic=false", json=FLAT).json()["created_at"]


def test_cli_remote_backend_matches_local(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(FLAT))
    local, remote = tmp_path / "local", tmp_path / "remote"
    assert main(["solve", "--config", str(cfg), "--out", str(local), "--deterministic"]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(remote), "--deterministic"], client=client) == 0
    for f in ("solve_report.json", "best_curve.csv", "traces.csv"):
        assert (local / f).read_bytes() == (remote / f).read_bytes()
    assert main(["list-spacetimes"], client=client) == 0


def test_cli_remote_config_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**FLAT, "endpoints": {"x_p": [0], "x_q": [1], "t_q": 1}}))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)], client=client) == 1
    assert "endpoints" in capsys.readouterr().err
