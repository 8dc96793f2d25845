"""Run a configured job and return its JSON-ready report.

These functions are what the HTTP endpoints call and what the CLI calls
when no server is given.  Each returns a plain dict that validates against
the matching response model in :mod:`statgeo.schemas`, with an
``exit_code`` field that follows the CLI's convention:

    0 success, 1 config/usage error, 2 no geodesic found, 3 verification failure
"""

from __future__ import annotations

import math
from datetime import datetime, timezone
from typing import Any, Optional

import numpy as np

from . import schemas
from .curves import SpacetimePolyline, SpatialPolyline, curve_columns, straight_line
from .field_expr import ExpressionError
from .functional import (
    DegenerateCurve,
    ProblemInstance,
    arrival_upper_bound,
    lightlike_arrival,
    time_reconstruction,
)
from .metric import (
    DomainViolation,
    InvalidSpacetime,
    StationarySpacetime,
    build_spacetime,
    list_spacetimes,
    registry_get,
)
from .solver import NoFeasibleSeed, SeedSpec, SolveConfig, dedupe, run_seeds
from .verify import ProbeSpec, SamplingSpec, VerifyThresholds, causal_curve_check, verify_curve
from .verify import diagnose as run_diagnose

EXIT_OK, EXIT_CONFIG, EXIT_NO_GEODESIC, EXIT_VERIFY = 0, 1, 2, 3


class ConfigError(ValueError):
    """Bad configuration or usage; maps to exit code 1."""


def sanitize(obj: Any) -> Any:
    """Replace non-finite floats by ``None`` so reports stay strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, np.floating):
        return sanitize(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {k: sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    return obj


def _finish(model, report: dict, deterministic: bool) -> dict:
    """Stamp, sanitize and round-trip through the response model."""
    report["created_at"] = None if deterministic else datetime.now(timezone.utc).isoformat()
    return model.model_validate(sanitize(report)).model_dump(mode="json")


# -- config -> domain objects ----------------------------------------------------


def spacetime_from(spec: schemas.SpacetimeSpec) -> StationarySpacetime:
    try:
        if spec.registry is not None:
            return registry_get(spec.registry.name, spec.registry.params)
        inl = spec.inline
        return build_spacetime(
            inl.coords, inl.g, inl.beta, inl.delta, domain=inl.domain, periods=inl.periods,
            base_point=inl.base_point,
        )
    except KeyError as exc:
        raise ConfigError(f"spacetime.registry.name: {exc.args[0]}") from exc
    except TypeError as exc:
        raise ConfigError(f"spacetime.registry.params: {exc}") from exc
    except (InvalidSpacetime, ExpressionError, DomainViolation) as exc:
        raise ConfigError(f"spacetime: {exc}") from exc


def problem_from(cfg: schemas.RunConfig, st: StationarySpacetime | None = None) -> ProblemInstance:
    st = st or spacetime_from(cfg.spacetime)
    ep = cfg.endpoints
    if ep is None:
        raise ConfigError("endpoints: required for this command")
    try:
        return ProblemInstance(st, ep.x_p, ep.t_p, ep.x_q, ep.t_q, tuple(ep.windings or ()))
    except (ValueError, DomainViolation) as exc:
        raise ConfigError(f"endpoints: {exc}") from exc


def solve_config_from(model: schemas.SolverModel) -> SolveConfig:
    s = model.seeds
    return SolveConfig(
        n=model.n, max_iters=model.max_iters, grad_tol=model.grad_tol, c1=model.c1,
        backtrack=model.backtrack, h_scale=model.h_scale, preconditioner=model.preconditioner,
        seeds=SeedSpec(s.count, s.winding_range, s.perturbation, s.rng_seed),
        dedupe_radius=model.dedupe_radius, stall_window=model.stall_window,
        blowup_factor=model.blowup_factor, boundary_floor=model.boundary_floor,
    )


def table_from_curve(curve) -> dict:
    if isinstance(curve, SpacetimePolyline):
        spatial, times = curve.spatial, curve.times
    else:
        spatial, times = curve, None
    cols = curve_columns(spatial.dim, times is not None)
    data = np.column_stack([spatial.params, spatial.nodes] + ([times] if times is not None else []))
    return {"columns": cols, "rows": data.tolist()}


def curve_from_table(table: schemas.CurveTable, st: StationarySpacetime):
    d = st.dim
    cols = [c.strip() for c in table.columns]
    with_time = cols == curve_columns(d, True)
    if not with_time and cols != curve_columns(d, False):
        raise ConfigError(f"curve columns {cols} do not match {curve_columns(d, False)} (optionally with 't')")
    if len(table.rows) < 2:
        raise ConfigError("curve needs at least two node rows")
    data = np.asarray(table.rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(cols):
        raise ConfigError("curve rows do not match the column count")
    n = data.shape[0] - 1
    if not np.allclose(data[:, 0], np.linspace(0.0, 1.0, n + 1), atol=1e-9):
        raise ConfigError("column 's' must be the uniform parameter i/n")
    spatial = SpatialPolyline(data[:, 1 : 1 + d], st.base.periods)
    return SpacetimePolyline(spatial, data[:, -1]) if with_time else spatial


def _problem_model(pi: ProblemInstance) -> dict:
    return {
        "spacetime": pi.spacetime.name,
        "dimension": pi.spacetime.dim,
        "x_p": list(pi.x_p),
        "t_p": pi.t_p,
        "x_q": list(pi.x_q),
        "t_q": pi.t_q,
        "windings": list(pi.windings),
    }


# -- jobs -------------------------------------------------------------------------


def solve(cfg: schemas.RunConfig, deterministic: bool = True, threads: Optional[int] = None) -> dict:
    pi = problem_from(cfg)
    scfg = solve_config_from(cfg.solver)
    if threads:
        scfg = SolveConfig(**{**scfg.__dict__, "threads": threads})
    try:
        reports = run_seeds(pi, scfg)
    except NoFeasibleSeed as exc:
        raise ConfigError(f"endpoints: {exc}") from exc
    converged = dedupe([r for r in reports if r.converged], scfg.dedupe_radius)
    if converged:
        best, code = converged[0], EXIT_OK
    else:
        best, code = min(reports, key=lambda r: (r.value, r.seed_index)), EXIT_NO_GEODESIC
    lift = time_reconstruction(pi, best.curve)
    traces = cfg.output.traces
    report = {
        "schema_version": schemas.SCHEMA_VERSION,
        "kind": "solve",
        "exit_code": code,
        "problem": _problem_model(pi),
        "converged": sum(1 for r in reports if r.converged),
        "distinct_geodesics": len(converged),
        "timelike": sum(1 for r in converged if r.character == "timelike"),
        "best": best.to_dict(include_traces=traces),
        "distinct_seed_indices": [r.seed_index for r in converged],
        "runs": [r.to_dict(include_traces=False) for r in reports],
        "best_curve": table_from_curve(lift),
    }
    return _finish(schemas.SolveResponse, report, deterministic)


def verify(cfg: schemas.RunConfig, table: schemas.CurveTable, deterministic: bool = True) -> dict:
    st = spacetime_from(cfg.spacetime)
    curve = curve_from_table(table, st)
    try:
        if isinstance(curve, SpatialPolyline):
            curve = time_reconstruction(problem_from(cfg, st), curve)
        t = cfg.verify
        rep = verify_curve(st, curve, VerifyThresholds(t.residual, t.cz_drift, t.energy_drift))
    except (DomainViolation, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"curve: {exc}") from exc
    out = {
        "schema_version": schemas.SCHEMA_VERSION,
        "kind": "verify",
        "exit_code": EXIT_OK if rep.passed else EXIT_VERIFY,
        **rep.to_dict(include_segments=True),
    }
    return _finish(schemas.VerifyResponse, out, deterministic)


def lightlike(cfg: schemas.RunConfig, table: Optional[schemas.CurveTable] = None, deterministic: bool = True) -> dict:
    pi = problem_from(cfg)
    st = pi.spacetime
    if table is not None:
        x = curve_from_table(table, st)
        if isinstance(x, SpacetimePolyline):
            x = x.spatial
    else:
        x = straight_line(pi.x_p, pi.target(), cfg.solver.n, st.base.periods)
    try:
        T, lift = lightlike_arrival(pi, x)
        T_up = arrival_upper_bound(pi, x)
    except DegenerateCurve as exc:
        raise ConfigError(f"lightlike: {exc}") from exc
    except (DomainViolation, ValueError) as exc:
        raise ConfigError(f"curve: {exc}") from exc
    out = {
        "schema_version": schemas.SCHEMA_VERSION,
        "kind": "lightlike",
        "exit_code": EXIT_OK,
        "arrival_time": T,
        "arrival_upper_bound": T_up,
        "arrival_point": list(pi.x_q) + [float(lift.times[-1])],
        "causal": causal_curve_check(st, lift).to_dict(),
        "curve": table_from_curve(lift),
    }
    return _finish(schemas.LightlikeResponse, out, deterministic)


def diagnose(cfg: schemas.RunConfig, deterministic: bool = True) -> dict:
    st = spacetime_from(cfg.spacetime)
    dm = cfg.diagnose
    dirs = tuple(tuple(v) for v in dm.directions) if dm.directions else None
    if dirs and any(len(v) != st.dim for v in dirs):
        raise ConfigError(f"diagnose.directions: each direction needs {st.dim} components")
    sampling = SamplingSpec(dm.r_min, dm.r_max, dm.count, dirs, dm.slack)
    probe = ProbeSpec(dm.probe_r_start, dm.probe_r_limit, dm.probe_length_cap, directions=dirs)
    try:
        diag = run_diagnose(st, sampling, probe)
    except DomainViolation as exc:
        raise ConfigError(f"diagnose: {exc}") from exc
    out = {"schema_version": schemas.SCHEMA_VERSION, "kind": "diagnose", "exit_code": EXIT_OK, **diag.to_dict()}
    return _finish(schemas.DiagnoseResponse, out, deterministic)


def spacetimes() -> list[dict]:
    return sanitize(list_spacetimes())
