"""Pydantic models for run configurations and for every emitted report.

One set of models serves both sides of the wire: the CLI validates its
JSON config with them and the HTTP service uses them for request and
response bodies.
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

SCHEMA_VERSION = "1"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- configuration ------------------------------------------------------------


class RegistrySpec(_Strict):
    name: str
    params: dict[str, Any] = Field(default_factory=dict)


class InlineSpec(_Strict):
    coords: Optional[list[str]] = None
    dimension: Optional[int] = Field(default=None, ge=1)
    domain: list[str] = Field(default_factory=list, description="expressions required to be >= 0")
    periods: Optional[list[Optional[float]]] = None
    g: list[list[str | float]]
    beta: str | float
    delta: list[str | float] = Field(description="vector components of delta in the chart, paired through g")
    base_point: Optional[list[float]] = None

    @model_validator(mode="after")
    def _dims(self):
        d = len(self.coords) if self.coords else self.dimension
        if d is None:
            d = len(self.g)
        if self.coords is None:
            self.coords = [f"x{i + 1}" for i in range(d)]
        if self.dimension is not None and self.dimension != len(self.coords):
            raise ValueError("dimension does not match the number of coords")
        self.dimension = len(self.coords)
        return self


class SpacetimeSpec(_Strict):
    registry: Optional[RegistrySpec] = None
    inline: Optional[InlineSpec] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.registry is None) == (self.inline is None):
            raise ValueError("exactly one of 'registry' or 'inline' must be given")
        return self


class EndpointsSpec(_Strict):
    x_p: list[float]
    t_p: float = 0.0
    x_q: list[float]
    t_q: float
    windings: Optional[list[int]] = None

    @model_validator(mode="after")
    def _dims(self):
        if len(self.x_p) != len(self.x_q):
            raise ValueError("x_p and x_q must have the same dimension")
        if self.windings is not None and len(self.windings) != len(self.x_p):
            raise ValueError("windings must have one entry per coordinate")
        return self


class SeedModel(_Strict):
    count: int = Field(default=2, ge=0)
    winding_range: int = Field(default=0, ge=0)
    perturbation: float = Field(default=0.1, ge=0)
    rng_seed: int = 0


class SolverModel(_Strict):
    n: int = Field(default=128, ge=1)
    max_iters: int = Field(default=3000, ge=0)
    grad_tol: float = Field(default=1e-10, gt=0)
    c1: float = Field(default=1e-4, gt=0, lt=1)
    backtrack: float = Field(default=0.5, gt=0, lt=1)
    h_scale: float = Field(default=1e-6, gt=0)
    preconditioner: str = Field(default="h1", pattern="^(h1|none)$")
    seeds: SeedModel = Field(default_factory=SeedModel)
    dedupe_radius: float = Field(default=1e-3, gt=0)
    stall_window: int = Field(default=100, ge=1)
    blowup_factor: float = Field(default=50.0, gt=1)
    boundary_floor: float = Field(default=1e-3, gt=0)


class VerifyModel(_Strict):
    """Residual and energy-drift limits scale with max(1, mean |z'|_R^2)."""

    residual: float = Field(default=1e-3, gt=0)
    cz_drift: float = Field(default=1e-8, gt=0)
    energy_drift: float = Field(default=1e-4, gt=0)


class LightlikeModel(_Strict):
    curve: Optional[str] = Field(default=None, description="CSV with columns s, x1..xd; straight seed if omitted")


class DiagnoseModel(_Strict):
    r_min: float = Field(default=1.0, gt=0)
    r_max: float = Field(default=100.0, gt=0)
    count: int = Field(default=32, ge=4)
    directions: Optional[list[list[float]]] = None
    slack: float = Field(default=0.1, ge=0)
    probe_r_start: float = Field(default=0.5, gt=0)
    probe_r_limit: float = Field(default=1e8, gt=0)
    probe_length_cap: float = Field(default=1e3, gt=0)


class OutputModel(_Strict):
    dir: str = "out"
    traces: bool = True


class RunConfig(_Strict):
    spacetime: SpacetimeSpec
    endpoints: Optional[EndpointsSpec] = None
    solver: SolverModel = Field(default_factory=SolverModel)
    verify: VerifyModel = Field(default_factory=VerifyModel)
    lightlike: LightlikeModel = Field(default_factory=LightlikeModel)
    diagnose: DiagnoseModel = Field(default_factory=DiagnoseModel)
    output: OutputModel = Field(default_factory=OutputModel)


# -- curves on the wire --------------------------------------------------------


class CurveTable(BaseModel):
    columns: list[str]
    rows: list[list[float]]


# -- reports --------------------------------------------------------------------


class BreakdownModel(BaseModel):
    kinetic: float
    mixed: float
    A: float
    B: float
    value: float
    C_z: float
    delta_t: float


class PSDiagnostics(BaseModel):
    h1_initial: float
    h1_final: float
    boundary_distance_min: Optional[float]
    base_point_distance_max: float


class RunReportModel(BaseModel):
    status: str = Field(pattern="^(converged|boundary_escape|norm_blowup|stalled|max_iters)$")
    seed_index: int
    seed_label: str
    J: float
    C_z: float
    grad_norm: float
    iterations: int
    character: str
    breakdown: BreakdownModel
    ps_diagnostics: PSDiagnostics
    traces: Optional[dict[str, list[Optional[float]]]] = None


class ProblemModel(BaseModel):
    spacetime: str
    dimension: int
    x_p: list[float]
    t_p: float
    x_q: list[float]
    t_q: float
    windings: list[int]


class SolveResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    kind: str = "solve"
    exit_code: int
    problem: ProblemModel
    converged: int
    distinct_geodesics: int
    timelike: int
    best: Optional[RunReportModel]
    distinct_seed_indices: list[int] = Field(description="seed_index of each distinct converged run, by J")
    runs: list[RunReportModel] = Field(description="every run, in seed order")
    best_curve: Optional[CurveTable] = None
    created_at: Optional[str] = None


class CausalModel(BaseModel):
    verdict: str = Field(pattern="^(causal-future|causal-past|not-causal)$")
    first_offending_segment: Optional[int]
    orientation_consistent: bool
    t_strictly_monotone: bool
    first_nonmonotone_segment: Optional[int]
    note: str
    segments: Optional[list[dict[str, str]]] = None


class VerifyResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    kind: str = "verify"
    exit_code: int
    passed: bool
    max_residual: float
    cz_drift: float
    energy_drift: float
    mean_cz: float
    mean_energy: float
    speed_scale: float
    causal: CausalModel
    thresholds: VerifyModel
    created_at: Optional[str] = None


class VerifyRequest(BaseModel):
    config: RunConfig
    curve: CurveTable


class LightlikeRequest(BaseModel):
    config: RunConfig
    curve: Optional[CurveTable] = None


class LightlikeResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    kind: str = "lightlike"
    exit_code: int
    arrival_time: float
    arrival_upper_bound: float
    arrival_point: list[float]
    causal: CausalModel
    curve: CurveTable
    created_at: Optional[str] = None


class RayFitModel(BaseModel):
    direction: list[float]
    beta_exponent: Optional[float]
    delta_exponent: Optional[float]
    samples_used: int
    exited_domain_at: Optional[float] = None
    dropped_nonfinite: int = 0


class ProbeRayModel(BaseModel):
    direction: list[float]
    verdict: str = Field(pattern="^(diverges|converges|boundary)$")
    conformal_length: float
    reached_radius: float


class DiagnoseResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    kind: str = "diagnose"
    exit_code: int
    beta_exponent: float
    delta_exponent: float
    quad_ok: bool
    linear_ok: bool
    rays: list[RayFitModel]
    probe: list[ProbeRayModel]
    conformal_complete: Optional[bool]
    warnings: list[str]
    distance_proxy: str
    created_at: Optional[str] = None


class SpacetimeInfo(BaseModel):
    name: str
    params: dict[str, Any]
    description: str


class ErrorResponse(BaseModel):
    exit_code: int
    error: str
