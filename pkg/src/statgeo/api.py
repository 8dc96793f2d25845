"""HTTP front door to :mod:`statgeo.service`; config errors become 400 responses."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import schemas, service

app = FastAPI(title="statgeo", version=schemas.SCHEMA_VERSION)


def _run(fn, *args):
    try:
        return fn(*args)
    except service.ConfigError as exc:
        body = schemas.ErrorResponse(exit_code=service.EXIT_CONFIG, error=str(exc))
        return JSONResponse(status_code=400, content=body.model_dump())


@app.get("/spacetimes", response_model=list[schemas.SpacetimeInfo])
def get_spacetimes():
    return service.spacetimes()


@app.post("/solve", response_model=schemas.SolveResponse, responses={400: {"model": schemas.ErrorResponse}})
def post_solve(cfg: schemas.RunConfig, deterministic: bool = True):
    return _run(service.solve, cfg, deterministic)


@app.post("/verify", response_model=schemas.VerifyResponse, responses={400: {"model": schemas.ErrorResponse}})
def post_verify(req: schemas.VerifyRequest, deterministic: bool = True):
    return _run(service.verify, req.config, req.curve, deterministic)


@app.post("/lightlike", response_model=schemas.LightlikeResponse, responses={400: {"model": schemas.ErrorResponse}})
def post_lightlike(req: schemas.LightlikeRequest, deterministic: bool = True):
    return _run(service.lightlike, req.config, req.curve, deterministic)


@app.post("/diagnose", response_model=schemas.DiagnoseResponse, responses={400: {"model": schemas.ErrorResponse}})
def post_diagnose(cfg: schemas.RunConfig, deterministic: bool = True):
    return _run(service.diagnose, cfg, deterministic)
