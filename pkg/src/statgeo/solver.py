"""Descent on the reduced action, multistart seeding and failure diagnostics.

The descent direction is the gradient taken in the discrete H^1 metric of
the curve space, i.e. the finite-difference gradient of ``J`` preconditioned
by a segment-weighted 1-d Laplacian on interior nodes.  Without that the
iteration count grows like ``n^2``.  Step lengths come from Armijo
backtracking, so the ``J`` trace never increases by more than the floating
point resolution of ``J`` itself (once the predicted decrease drops below that
resolution, steps are accepted on the gradient alone).

A run that does not converge is classified by the compactness monitor:
``norm_blowup`` when the curve energy grows without bound while ``J`` keeps
decreasing, ``boundary_escape`` when nodes pile up against the domain
boundary, ``stalled`` when neither ``J`` nor the gradient makes progress over a window
and ``max_iters`` otherwise.
"""

from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from .curves import SpatialPolyline, curve_distance, segment_fields, straight_line
from .functional import FunctionalBreakdown, ProblemInstance, gradient, reduced_action
from .metric import DomainViolation, minimal_image

log = logging.getLogger(__name__)

STATUSES = ("converged", "boundary_escape", "norm_blowup", "stalled", "max_iters")


class NoFeasibleSeed(ValueError):
    """No seed curve could be placed inside the domain."""


@dataclass(frozen=True)
class SeedSpec:
    count: int = 2  # random perturbations per homotopy class
    winding_range: int = 0  # offsets -k..k on each periodic coordinate
    perturbation: float = 0.1
    rng_seed: int = 0


@dataclass(frozen=True)
class SolveConfig:
    n: int = 128
    max_iters: int = 3000
    grad_tol: float = 1e-10  # relative to max(1, |x'|^2)
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    h_scale: float = 1e-6
    preconditioner: str = "h1"  # "h1" or "none"
    seeds: SeedSpec = field(default_factory=SeedSpec)
    dedupe_radius: float = 1e-3
    stall_window: int = 100
    blowup_factor: float = 50.0
    boundary_floor: float = 1e-3
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not (self.grad_tol > 0 and self.c1 > 0 and self.dedupe_radius > 0 and self.boundary_floor > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.preconditioner not in ("h1", "none"):
            raise ValueError("preconditioner must be 'h1' or 'none'")


@dataclass
class SolveReport:
    status: str
    curve: SpatialPolyline
    breakdown: FunctionalBreakdown
    grad_norm: float
    iterations: int
    traces: dict[str, list[float]]
    seed_index: int = 0
    seed_label: str = "straight"

    @property
    def value(self) -> float:
        return self.breakdown.value

    @property
    def C_z(self) -> float:
        return self.breakdown.C_z

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def character(self) -> str:
        """Causal character of the lifted curve from its energy ``2 J``."""
        energy = 2.0 * self.value
        scale = 1e-9 * max(1.0, self.breakdown.h1 + abs(self.breakdown.C_z) ** 2 * self.breakdown.B)
        if energy < -scale:
            return "timelike"
        if energy > scale:
            return "spacelike"
        return "lightlike"

    def to_dict(self, include_traces: bool = True) -> dict:
        out = {
            "status": self.status,
            "seed_index": self.seed_index,
            "seed_label": self.seed_label,
            "J": self.value,
            "C_z": self.C_z,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "character": self.character,
            "breakdown": self.breakdown.to_dict(),
            "ps_diagnostics": {
                "h1_initial": self.traces["h1"][0],
                "h1_final": self.traces["h1"][-1],
                "boundary_distance_min": min(self.traces["boundary_distance"]),
                "base_point_distance_max": max(self.traces["base_point_distance"]),
            },
        }
        if include_traces:
            out["traces"] = self.traces
        return out


# -- seeding ----------------------------------------------------------------


def _feasible(pi: ProblemInstance, c: SpatialPolyline) -> bool:
    try:
        segment_fields(pi.spacetime, c)
    except DomainViolation:
        return False
    return True


def _bump_directions(chord: np.ndarray) -> list[np.ndarray]:
    d = chord.shape[0]
    norm = np.linalg.norm(chord)
    u = chord / norm if norm > 0 else np.zeros(d)
    dirs = []
    for k in range(d):
        for sign in (1.0, -1.0):
            e = np.zeros(d)
            e[k] = sign
            w = e - np.dot(e, u) * u
            if np.linalg.norm(w) > 1e-8:
                w = w / np.linalg.norm(w)
                if not any(np.allclose(w, v) for v in dirs):
                    dirs.append(w)
    return dirs


def repair(pi: ProblemInstance, c: SpatialPolyline) -> SpatialPolyline:
    """Push a seed off infeasible regions with the smallest feasible bump."""
    if _feasible(pi, c):
        return c
    s = c.params[:, None]
    bump = np.sin(np.pi * s)
    chord = c.nodes[-1] - c.nodes[0]
    scale = max(1.0, float(np.linalg.norm(chord)))
    for lam in 0.02 * scale * 1.3 ** np.arange(40):
        for u in _bump_directions(chord):
            cand = c.with_nodes(c.nodes + lam * bump * u)
            if _feasible(pi, cand):
                return cand
    raise NoFeasibleSeed("no feasible seed curve found; the endpoints may lie in different domain components")


def winding_offsets(pi: ProblemInstance, spec: SeedSpec) -> list[tuple[int, ...]]:
    ranges = []
    for base, p in zip(pi.windings, pi.spacetime.base.periods):
        if p is None:
            ranges.append([0])
        else:
            k = int(spec.winding_range)
            ranges.append([base + j for j in range(-k, k + 1)])
    return [tuple(w) for w in itertools.product(*ranges)]


def seed_curves(pi: ProblemInstance, n: int, spec: SeedSpec | None = None) -> list[tuple[str, SpatialPolyline]]:
    """Straight chart lines per homotopy class plus random smooth perturbations."""
    spec = spec or SeedSpec()
    rng = np.random.default_rng(spec.rng_seed)
    per = pi.spacetime.base.periods
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    seeds = []
    for w in winding_offsets(pi, spec):
        line = straight_line(pi.x_p, pi.target(w), n, per)
        label = f"w={list(w)}" if any(p is not None for p in per) else "straight"
        seeds.append((label, line))
        L = max(1.0, float(np.linalg.norm(line.nodes[-1] - line.nodes[0])))
        for j in range(spec.count):
            coeffs = rng.standard_normal((3, pi.spacetime.dim))
            modes = sum(np.sin((m + 1) * np.pi * s) * coeffs[m] / (m + 1) for m in range(3))
            seeds.append((f"{label} random {j}", line.with_nodes(line.nodes + spec.perturbation * L * modes)))
    out, errors = [], 0
    for label, c in seeds:
        try:
            out.append((label, repair(pi, c)))
        except NoFeasibleSeed:
            errors += 1
    if not out:
        raise NoFeasibleSeed("no feasible seed curve found; the endpoints may lie in different domain components")
    return out


# -- descent ----------------------------------------------------------------


def _preconditioner(pi: ProblemInstance, X: np.ndarray, n: int, kind: str):
    """Banded upper form of the per-coordinate H^1 matrices, shape (d, 2, n-1)."""
    d = X.shape[1]
    if kind == "none":
        ab = np.zeros((d, 2, n - 1))
        ab[:, 1] = 1.0
        return ab
    c = SpatialPolyline(X, pi.spacetime.base.periods)
    sf = segment_fields(pi.spacetime, c)
    gd = np.einsum("nij,nj->ni", sf.g, sf.delta)
    w = np.einsum("nii->ni", sf.g) + gd**2 / sf.beta[:, None]  # (n, d)
    w = np.maximum(w, 1e-12)
    ab = np.zeros((d, 2, n - 1))
    ab[:, 1] = n * (w[:-1] + w[1:]).T
    ab[:, 0, 1:] = -n * w[1:-1].T
    return ab


def _apply_inverse(ab: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.column_stack([solveh_banded(ab[k], g[:, k]) for k in range(g.shape[1])])


def _value(pi: ProblemInstance, c: SpatialPolyline) -> Optional[FunctionalBreakdown]:
    try:
        b = reduced_action(pi, c)
    except DomainViolation:
        return None
    return b if np.isfinite(b.value) else None


def minimize(pi: ProblemInstance, x0: SpatialPolyline, cfg: SolveConfig | None = None,
             seed_index: int = 0, seed_label: str = "straight") -> SolveReport:
    cfg = cfg or SolveConfig()
    st = pi.spacetime
    n = x0.n
    X = np.array(x0.nodes)
    xbar = np.asarray(st.base.base_point)
    per = st.base.period_array
    b = reduced_action(pi, x0)
    h1_ref = max(b.h1, 1e-12)
    traces: dict[str, list[float]] = {k: [] for k in ("J", "grad_norm", "h1", "boundary_distance", "base_point_distance")}
    status, gn, it = "max_iters", float("inf"), 0
    below_floor = 0

    for it in range(cfg.max_iters + 1):
        c = SpatialPolyline(X, st.base.periods)
        traces["J"].append(b.value)
        traces["h1"].append(b.h1)
        traces["boundary_distance"].append(float(np.min(st.base.boundary_distance(X))))
        traces["base_point_distance"].append(float(np.max(np.linalg.norm(minimal_image(X - xbar, per), axis=1))))
        if n < 2:
            traces["grad_norm"].append(0.0)
            gn, status = 0.0, "converged"
            break
        g = gradient(pi, c, cfg.h_scale)
        ab = _preconditioner(pi, X, n, cfg.preconditioner)
        p = _apply_inverse(ab, g)
        gn = float(np.sqrt(max(np.sum(g * p), 0.0)))
        traces["grad_norm"].append(gn)

        if gn <= cfg.grad_tol * max(1.0, b.h1):
            status = "converged"
            break
        if b.h1 > cfg.blowup_factor * h1_ref:
            status = "norm_blowup"
            break
        below_floor = below_floor + 1 if traces["boundary_distance"][-1] < cfg.boundary_floor else 0
        if below_floor >= cfg.stall_window:
            status = "boundary_escape"
            break
        if it >= cfg.stall_window:
            past = traces["J"][-1 - cfg.stall_window]
            # J flat at roundoff is fine while the gradient keeps shrinking
            flat = past - b.value <= 1e-14 * (1.0 + abs(b.value))
            if flat and gn > 0.5 * traces["grad_norm"][-1 - cfg.stall_window]:
                status = "stalled"
                break
        if it == cfg.max_iters:
            break

        slope = -gn * gn
        # below this predicted decrease J differences are pure roundoff
        resolution = 64 * np.finfo(float).eps * (abs(b.value) + b.h1 + abs(b.C_z) * b.B + 1.0)
        step = 1.0
        accepted = None
        for _ in range(cfg.max_backtracks):
            Xn = X.copy()
            Xn[1:-1] -= step * p
            bn = _value(pi, SpatialPolyline(Xn, st.base.periods))
            if bn is not None and (
                bn.value <= b.value + cfg.c1 * step * slope
                or (-step * slope < resolution and bn.value <= b.value + resolution)
            ):
                accepted = (Xn, bn)
                break
            step *= cfg.backtrack
        if accepted is None:
            status = "boundary_escape" if traces["boundary_distance"][-1] < cfg.boundary_floor else "stalled"
            break
        X, b = accepted

    log.debug("minimize %s: %s after %d iterations (J=%.12g, |g|=%.3g)", seed_label, status, it, b.value, gn)
    return SolveReport(status, SpatialPolyline(X, st.base.periods), b, gn, it, traces, seed_index, seed_label)


def default_threads() -> int:
    """CPU count, capped by ``STATGEO_THREADS`` when that is set."""
    n = os.cpu_count() or 1
    try:
        cap = int(os.environ["STATGEO_THREADS"])
    except (KeyError, ValueError):
        return n
    return max(1, min(n, cap))


def dedupe(reports: list[SolveReport], radius: float) -> list[SolveReport]:
    kept: list[SolveReport] = []
    for r in sorted(reports, key=lambda r: (r.value, r.seed_index)):
        if all(curve_distance(r.curve, k.curve) > radius for k in kept):
            kept.append(r)
    return kept


def run_seeds(pi: ProblemInstance, cfg: SolveConfig | None = None) -> list[SolveReport]:
    """Minimize from every seed; reports come back in seed order."""
    cfg = cfg or SolveConfig()
    seeds = seed_curves(pi, cfg.n, cfg.seeds)
    threads = cfg.threads or default_threads()

    def run(item):
        idx, (label, c) = item
        return minimize(pi, c, cfg, idx, label)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(run, enumerate(seeds)))
    else:
        reports = [run(item) for item in enumerate(seeds)]
    return reports


def multistart(pi: ProblemInstance, cfg: SolveConfig | None = None) -> list[SolveReport]:
    """Distinct converged curves first, sorted by ``J``, then every unconverged run."""
    cfg = cfg or SolveConfig()
    reports = run_seeds(pi, cfg)
    converged = dedupe([r for r in reports if r.converged], cfg.dedupe_radius)
    others = [r for r in reports if not r.converged]
    return converged + others
