"""Checks on candidate geodesics and on the spacetime itself.

Nothing here touches the reduced action: the geodesic residual is built from
Christoffel symbols of the full Lorentzian metric (finite differences of
:func:`statgeo.metric.lorentz_metrics`), so it serves as an independent
oracle for whatever the solver produced.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .curves import SpacetimePolyline
from .metric import (
    CausalClass,
    DomainViolation,
    StationarySpacetime,
    classify_tangents,
    comparison_metrics,
    lorentz_metrics,
    minimal_image,
)

DISTANCE_PROXY = "chart straight-line (ray) length from the base point"
DISCRETE_CAUSALITY_NOTE = (
    "polylines have piecewise-constant tangents, so a curve is future causal iff every "
    "segment tangent is future causal and t increases strictly from node to node"
)


# -- geodesic residual ------------------------------------------------------


def christoffel(st: StationarySpacetime, points, step: float = 1e-5) -> np.ndarray:
    """Christoffel symbols ``Gamma[m, a, b, c]`` of the Lorentzian metric.

    Derivatives in the time direction vanish identically (the metric is
    stationary); spatial derivatives are central differences.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, d = pts.shape
    D = d + 1
    dL = np.zeros((m, D, D, D))  # dL[m, k, i, j] = d_k L_ij
    for k in range(d):
        h = step * np.maximum(1.0, np.abs(pts[:, k]))
        for _ in range(40):
            plus, minus = pts.copy(), pts.copy()
            plus[:, k] += h
            minus[:, k] -= h
            ok = st.base.contains(plus) & st.base.contains(minus)
            if ok.all():
                break
            h = np.where(ok, h, 0.5 * h)
        dL[:, k] = (lorentz_metrics(st, plus) - lorentz_metrics(st, minus)) / (2.0 * h)[:, None, None]
    Linv = np.linalg.inv(lorentz_metrics(st, pts))
    # first-kind symbols [m, d, b, c] = 1/2 (d_b L_dc + d_c L_db - d_d L_bc)
    first = 0.5 * (
        np.einsum("mbdc->mdbc", dL) + np.einsum("mcdb->mdbc", dL) - dL
    )
    return np.einsum("mad,mdbc->mabc", Linv, first)


def residual_vectors(st: StationarySpacetime, z: SpacetimePolyline) -> tuple[np.ndarray, np.ndarray]:
    """Discrete geodesic equation residual at interior nodes and the nodes."""
    n = z.n
    if n < 2:
        raise ValueError("the geodesic residual needs at least two segments")
    per = np.append(st.base.period_array, 0.0)
    Z = np.column_stack([z.spatial.nodes, z.times])
    steps = minimal_image(np.diff(Z, axis=0), per)
    acc = n * n * (steps[1:] - steps[:-1])
    vel = 0.5 * n * (steps[1:] + steps[:-1])
    nodes = z.spatial.nodes[1:-1]
    gamma = christoffel(st, nodes)
    r = acc + np.einsum("mabc,mb,mc->ma", gamma, vel, vel)
    return r, nodes


def geodesic_residual(st: StationarySpacetime, z: SpacetimePolyline) -> float:
    """Largest comparison-metric norm of the discrete geodesic residual."""
    r, nodes = residual_vectors(st, z)
    R = comparison_metrics(st, nodes)
    norms = np.sqrt(np.maximum(np.einsum("ma,mab,mb->m", r, R, r), 0.0))
    return float(np.max(norms))


# -- conservation -----------------------------------------------------------


def segment_invariants(st: StationarySpacetime, z: SpacetimePolyline) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment ``<z', K>_L`` and ``<z', z'>_L`` at midpoints."""
    mids = z.midpoints()
    L = lorentz_metrics(st, mids)
    v = z.velocities()
    Lv = np.einsum("mij,mj->mi", L, v)
    return Lv[:, -1], np.einsum("mi,mi->m", v, Lv)


def conservation_check(st: StationarySpacetime, z: SpacetimePolyline) -> tuple[float, float]:
    """``(C_z drift, energy drift)`` as max deviation from the segment mean."""
    killing, energy = segment_invariants(st, z)
    return float(np.max(np.abs(killing - killing.mean()))), float(np.max(np.abs(energy - energy.mean())))


# -- causality --------------------------------------------------------------


@dataclass
class CausalVerdict:
    verdict: str  # "causal-future" | "causal-past" | "not-causal"
    first_offending_segment: Optional[int]
    orientation_consistent: bool
    t_strictly_monotone: bool
    first_nonmonotone_segment: Optional[int]
    classes: list[CausalClass] = field(repr=False, default_factory=list)
    note: str = DISCRETE_CAUSALITY_NOTE

    def to_dict(self, include_segments: bool = False) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "classes"}
        if include_segments:
            out["segments"] = [asdict(c) for c in self.classes]
        return out


def causal_curve_check(st: StationarySpacetime, z: SpacetimePolyline) -> CausalVerdict:
    classes = classify_tangents(st, z.midpoints(), z.velocities())
    dt = np.diff(z.times)
    first = classes[0]
    orientation = first.orientation if first.causal else "future"
    want_sign = 1.0 if orientation == "future" else -1.0

    bad_class = [i for i, c in enumerate(classes) if not (c.causal and c.orientation == orientation)]
    bad_mono = [i for i, v in enumerate(dt) if not want_sign * v > 0]
    orient_ok = not bad_class
    mono_ok = not bad_mono
    offending = min(bad_class + bad_mono) if (bad_class or bad_mono) else None
    if orient_ok and mono_ok:
        verdict = "causal-future" if orientation == "future" else "causal-past"
    else:
        verdict = "not-causal"
    return CausalVerdict(
        verdict, offending, orient_ok, mono_ok, bad_mono[0] if bad_mono else None, classes
    )


# -- full verification report ------------------------------------------------


@dataclass(frozen=True)
class VerifyThresholds:
    """Pass limits.  ``residual`` and ``energy_drift`` are relative to
    ``max(1, mean |z'|_R^2)`` since both scale with the squared speed;
    ``cz_drift`` is absolute."""

    residual: float = 1e-3
    cz_drift: float = 1e-8
    energy_drift: float = 1e-4


@dataclass
class VerificationReport:
    max_residual: float
    cz_drift: float
    energy_drift: float
    mean_cz: float
    mean_energy: float
    causal: CausalVerdict
    thresholds: VerifyThresholds
    speed_scale: float = 1.0  # mean per-segment |z'|_R^2

    @property
    def passed(self) -> bool:
        t = self.thresholds
        k = max(1.0, self.speed_scale)
        return (self.max_residual <= t.residual * k and self.cz_drift <= t.cz_drift
                and self.energy_drift <= t.energy_drift * k)

    def to_dict(self, include_segments: bool = False) -> dict:
        return {
            "passed": self.passed,
            "max_residual": self.max_residual,
            "cz_drift": self.cz_drift,
            "energy_drift": self.energy_drift,
            "mean_cz": self.mean_cz,
            "mean_energy": self.mean_energy,
            "speed_scale": self.speed_scale,
            "causal": self.causal.to_dict(include_segments),
            "thresholds": asdict(self.thresholds),
        }


def verify_curve(st: StationarySpacetime, z: SpacetimePolyline,
                 thresholds: VerifyThresholds | None = None) -> VerificationReport:
    thresholds = thresholds or VerifyThresholds()
    killing, energy = segment_invariants(st, z)
    cz, ed = conservation_check(st, z)
    res = geodesic_residual(st, z) if z.n >= 2 else 0.0
    v = z.velocities()
    scale = float(np.mean(np.einsum("mi,mij,mj->m", v, comparison_metrics(st, z.midpoints()), v)))
    return VerificationReport(
        res, cz, ed, float(killing.mean()), float(energy.mean()), causal_curve_check(st, z), thresholds, scale
    )


# -- global hyperbolicity diagnostics -----------------------------------------


def default_directions(d: int) -> np.ndarray:
    dirs = [s * np.eye(d)[k] for k in range(d) for s in (1.0, -1.0)]
    if d >= 2:
        diag = np.ones(d) / math.sqrt(d)
        dirs += [diag, -diag]
    return np.array(dirs)


@dataclass(frozen=True)
class SamplingSpec:
    r_min: float = 1.0
    r_max: float = 100.0
    count: int = 32
    directions: Optional[tuple[tuple[float, ...], ...]] = None
    slack: float = 0.1

    def radii(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r_max, self.count)


@dataclass
class RayFit:
    direction: list[float]
    beta_exponent: Optional[float]
    delta_exponent: Optional[float]
    samples_used: int
    exited_domain_at: Optional[float] = None
    dropped_nonfinite: int = 0


@dataclass
class ProbeRay:
    direction: list[float]
    verdict: str  # "diverges" | "converges" | "boundary"
    conformal_length: float
    reached_radius: float


@dataclass
class HyperbolicityDiagnostics:
    beta_exponent: float
    delta_exponent: float
    quad_ok: bool
    linear_ok: bool
    rays: list[RayFit]
    probe: list[ProbeRay] = field(default_factory=list)
    conformal_complete: Optional[bool] = None
    warnings: list[str] = field(default_factory=list)
    distance_proxy: str = DISTANCE_PROXY

    def to_dict(self) -> dict:
        return asdict(self)


def _loglog_slope(r: np.ndarray, v: np.ndarray) -> Optional[float]:
    if r.size < 2:
        return None
    lv = np.log(np.maximum(v, 1e-300))
    if np.all(v <= 1e-300):
        return 0.0
    lr = np.log(r)
    return float(np.polyfit(lr, lv, 1)[0])


def growth_bounds(st: StationarySpacetime, spec: SamplingSpec | None = None) -> HyperbolicityDiagnostics:
    """Fit power-law growth of ``beta`` and ``|delta|`` along rays from the base point."""
    spec = spec or SamplingSpec()
    d = st.dim
    xbar = np.asarray(st.base.base_point, dtype=float)
    dirs = np.array(spec.directions, dtype=float) if spec.directions else default_directions(d)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = spec.radii()
    rays, warnings = [], []
    for u in dirs:
        pts = xbar + radii[:, None] * u
        inside = st.base.contains(pts)
        exit_r = None
        if not inside.all():
            k = int(np.argmin(inside))
            exit_r = float(radii[k])
            pts, rr = pts[:k], radii[:k]
            warnings.append(f"ray {u.round(6).tolist()} leaves the domain near r={exit_r:.6g}; partial fit")
        else:
            rr = radii
        if rr.size == 0:
            rays.append(RayFit(u.tolist(), None, None, 0, exit_r))
            continue
        with np.errstate(all="ignore"):
            try:
                G, beta, delta = st.fields(pts)
            except DomainViolation as exc:
                warnings.append(f"ray {u.round(6).tolist()}: {exc}")
                rays.append(RayFit(u.tolist(), None, None, 0, exit_r))
                continue
            dnorm = np.sqrt(np.maximum(np.einsum("mi,mij,mj->m", delta, G, delta), 0.0))
        finite = np.isfinite(beta) & np.isfinite(dnorm)
        dropped = int(np.sum(~finite))
        rr, beta, dnorm = rr[finite], beta[finite], dnorm[finite]
        outer = slice(rr.size // 2, None)
        rays.append(
            RayFit(
                u.tolist(),
                _loglog_slope(rr[outer], beta[outer]),
                _loglog_slope(rr[outer], dnorm[outer]),
                int(rr[outer].size),
                exit_r,
                dropped,
            )
        )
        if dropped:
            warnings.append(f"ray {u.round(6).tolist()}: {dropped} non-finite samples dropped")
    b_exps = [r.beta_exponent for r in rays if r.beta_exponent is not None]
    d_exps = [r.delta_exponent for r in rays if r.delta_exponent is not None]
    b_exp = max(b_exps) if b_exps else 0.0
    d_exp = max(d_exps) if d_exps else 0.0
    return HyperbolicityDiagnostics(
        b_exp, d_exp, b_exp <= 2.0 + spec.slack, d_exp <= 1.0 + spec.slack, rays, warnings=warnings
    )


@dataclass(frozen=True)
class ProbeSpec:
    r_start: float = 0.5
    r_limit: float = 1e8
    length_cap: float = 1e3
    points_per_shell: int = 64
    directions: Optional[tuple[tuple[float, ...], ...]] = None


def _conformal_speed(st: StationarySpacetime, xbar, u, r) -> np.ndarray:
    pts = xbar + np.asarray(r)[:, None] * u
    with np.errstate(all="ignore"):
        G, beta, _ = st.fields(pts)
        val = np.sqrt(np.maximum(np.einsum("i,mij,j->m", u, G, u), 0.0) / beta)
    return np.where(np.isfinite(val), val, 0.0)


def _shell_length(st, xbar, u, a, b, m) -> float:
    edges = np.linspace(a, b, m + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return float(np.sum(_conformal_speed(st, xbar, u, mids)) * (b - a) / m)


def conformal_completeness_probe(st: StationarySpacetime, spec: ProbeSpec | None = None) -> list[ProbeRay]:
    """Accumulate the conformal length ``int sqrt(g(u,u)/beta) dr`` along rays."""
    spec = spec or ProbeSpec()
    xbar = np.asarray(st.base.base_point, dtype=float)
    dirs = np.array(spec.directions, dtype=float) if spec.directions else default_directions(st.dim)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    out = []
    for u in dirs:
        length, a, b = 0.0, 0.0, spec.r_start
        verdict = "converges"
        while True:
            inside = st.base.contains(np.array([xbar + b * u]))[0]
            if not inside:
                lo, hi = a, b
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    if st.base.contains(np.array([xbar + mid * u]))[0]:
                        lo = mid
                    else:
                        hi = mid
                if lo > a:
                    length += _shell_length(st, xbar, u, a, lo, spec.points_per_shell)
                a, verdict = lo, "boundary"
                break
            length += _shell_length(st, xbar, u, a, b, spec.points_per_shell)
            a = b
            if length > spec.length_cap:
                verdict = "diverges"
                break
            if b >= spec.r_limit:
                break
            b = min(2.0 * b, spec.r_limit)
        out.append(ProbeRay(u.tolist(), verdict, length, a))
    return out


def diagnose(st: StationarySpacetime, sampling: SamplingSpec | None = None,
             probe: ProbeSpec | None = None) -> HyperbolicityDiagnostics:
    diag = growth_bounds(st, sampling)
    rays = conformal_completeness_probe(st, probe)
    diag.probe = rays
    diag.conformal_complete = all(r.verdict == "diverges" for r in rays)
    xbar = np.asarray(st.base.base_point, dtype=float)
    _, _, delta = st.fields(xbar[None, :])
    if np.any(np.abs(delta) > 1e-12):
        diag.warnings.append("conformal completeness characterizes global hyperbolicity only when delta = 0")
    return diag
