"""The reduced action on spatial curves and the quantities derived from it.

For a spatial curve ``x`` joining ``x_p`` to ``x_q`` and a time lapse ``dt``
the reduced action is

    J(x) = 1/2 int g(x',x') + 1/2 int <delta,x'>^2/beta
           - 1/2 (int <delta,x'>/beta - dt)^2 / int 1/beta

and its critical points, lifted with the time function below, are exactly the
geodesics of the stationary metric between ``(x_p, t_p)`` and ``(x_q, t_q)``.
Every integral shares the midpoint rule of :mod:`statgeo.curves`, so the
algebraic identities between these quantities hold to roundoff on the
discrete level, not just in the limit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .curves import SpacetimePolyline, SpatialPolyline, segment_fields
from .metric import StationarySpacetime, minimal_image


class DegenerateCurve(ValueError):
    """The spatial path is constant; no lightlike lift exists."""


@dataclass(frozen=True)
class ProblemInstance:
    spacetime: StationarySpacetime
    x_p: tuple[float, ...]
    t_p: float
    x_q: tuple[float, ...]
    t_q: float
    windings: tuple[int, ...] = field(default=())

    def __post_init__(self):
        d = self.spacetime.dim
        object.__setattr__(self, "x_p", tuple(float(v) for v in np.atleast_1d(self.x_p)))
        object.__setattr__(self, "x_q", tuple(float(v) for v in np.atleast_1d(self.x_q)))
        if len(self.x_p) != d or len(self.x_q) != d:
            raise ValueError(f"endpoints must have dimension {d}")
        w = tuple(int(k) for k in self.windings) if self.windings else (0,) * d
        if len(w) != d:
            raise ValueError(f"windings must have {d} entries")
        for k, p in zip(w, self.spacetime.base.periods):
            if k and p is None:
                raise ValueError("windings are only meaningful on periodic coordinates")
        object.__setattr__(self, "windings", w)
        object.__setattr__(self, "t_p", float(self.t_p))
        object.__setattr__(self, "t_q", float(self.t_q))
        self.spacetime.base.require(np.array([self.x_p, self.x_q]))

    @property
    def delta_t(self) -> float:
        return self.t_q - self.t_p

    @property
    def periods(self) -> np.ndarray:
        return self.spacetime.base.period_array

    def target(self, windings: Sequence[int] | None = None) -> np.ndarray:
        """``x_q`` lifted to the covering space by the winding offsets."""
        w = np.asarray(self.windings if windings is None else windings, dtype=float)
        return np.asarray(self.x_q) + w * self.periods

    def with_times(self, t_p: float, t_q: float) -> "ProblemInstance":
        return ProblemInstance(self.spacetime, self.x_p, t_p, self.x_q, t_q, self.windings)


@dataclass(frozen=True)
class FunctionalBreakdown:
    kinetic: float  # 1/2 int g(x',x')
    mixed: float  # 1/2 int <delta,x'>^2/beta
    A: float  # int <delta,x'>/beta
    B: float  # int 1/beta
    value: float
    C_z: float
    delta_t: float

    @property
    def h1(self) -> float:
        return 2.0 * self.kinetic

    def to_dict(self) -> dict:
        return asdict(self)


def _check_endpoints(pi: ProblemInstance, x: SpatialPolyline) -> None:
    if x.dim != pi.spacetime.dim:
        raise ValueError(f"curve dimension {x.dim} does not match spacetime dimension {pi.spacetime.dim}")
    per = pi.periods
    for node, want, label in ((x.nodes[0], pi.x_p, "x_p"), (x.nodes[-1], pi.x_q, "x_q")):
        gap = minimal_image(node - np.asarray(want), per)
        if np.max(np.abs(gap)) > 1e-9 * max(1.0, float(np.max(np.abs(want)))):
            raise ValueError(f"curve endpoint {node.tolist()} does not match {label}={list(want)}")


def _breakdown(speed2, delta_dot, beta, dt) -> FunctionalBreakdown:
    kinetic = 0.5 * float(np.mean(speed2))
    mixed = 0.5 * float(np.mean(delta_dot**2 / beta))
    A = float(np.mean(delta_dot / beta))
    B = float(np.mean(1.0 / beta))
    C = (A - dt) / B
    value = kinetic + mixed - 0.5 * (A - dt) ** 2 / B
    return FunctionalBreakdown(kinetic, mixed, A, B, value, C, dt)


def reduced_action(pi: ProblemInstance, x: SpatialPolyline) -> FunctionalBreakdown:
    _check_endpoints(pi, x)
    sf = segment_fields(pi.spacetime, x)
    return _breakdown(sf.speed2, sf.delta_dot, sf.beta, pi.delta_t)


def constraint_constant(pi: ProblemInstance, x: SpatialPolyline) -> float:
    return reduced_action(pi, x).C_z


def time_reconstruction(pi: ProblemInstance, x: SpatialPolyline) -> SpacetimePolyline:
    """Lift ``x`` to the unique time function satisfying the Killing constraint."""
    _check_endpoints(pi, x)
    sf = segment_fields(pi.spacetime, x)
    C = _breakdown(sf.speed2, sf.delta_dot, sf.beta, pi.delta_t).C_z
    tdot = (sf.delta_dot - C) / sf.beta
    times = np.concatenate([[pi.t_p], pi.t_p + np.cumsum(tdot) / x.n])
    times[-1] = pi.t_q
    return SpacetimePolyline(x, times)


def segment_lorentz_norms(st: StationarySpacetime, z: SpacetimePolyline):
    """Per-segment ``<z',z'>_L`` and ``<z',K>_L`` at the midpoints."""
    sf = segment_fields(st, z.spatial)
    tdot = z.n * np.diff(z.times)
    energy = sf.speed2 + 2.0 * sf.delta_dot * tdot - sf.beta * tdot**2
    killing = sf.delta_dot - sf.beta * tdot
    return energy, killing


def full_action(pi: ProblemInstance, z: SpacetimePolyline) -> float:
    """Midpoint value of ``1/2 int <z',z'>_L ds``."""
    _check_endpoints(pi, z.spatial)
    if abs(z.times[0] - pi.t_p) > 1e-9 * max(1.0, abs(pi.t_p)) or abs(z.times[-1] - pi.t_q) > 1e-9 * max(
        1.0, abs(pi.t_q)
    ):
        raise ValueError("spacetime curve time endpoints do not match the problem instance")
    energy, _ = segment_lorentz_norms(pi.spacetime, z)
    return 0.5 * float(np.mean(energy))


def _lightlike_tdot(speed2, delta_dot, beta) -> np.ndarray:
    root = np.sqrt(delta_dot**2 + speed2 * beta)
    # the second form avoids cancellation when <delta, x'> < 0
    return np.where(
        delta_dot >= 0,
        (delta_dot + root) / beta,
        speed2 / np.where(root - delta_dot > 0, root - delta_dot, 1.0),
    )


def lightlike_arrival(pi: ProblemInstance, x: SpatialPolyline) -> tuple[float, SpacetimePolyline]:
    """Arrival time of the future lightlike lift of ``x`` leaving ``(x_p, t_p)``.

    Returns ``(T, lift)``; ``lift`` ends at ``(x_q, t_p + T)``.
    """
    _check_endpoints(pi, x)
    sf = segment_fields(pi.spacetime, x)
    if not np.any(sf.speed2 > 0):
        raise DegenerateCurve(
            "lightlike lift needs a non-constant spatial path (constant paths are excluded when x_p = x_q)"
        )
    tdot = _lightlike_tdot(sf.speed2, sf.delta_dot, sf.beta)
    times = np.concatenate([[pi.t_p], pi.t_p + np.cumsum(tdot) / x.n])
    return float(np.mean(tdot)), SpacetimePolyline(x, times)


def arrival_upper_bound(pi: ProblemInstance, x: SpatialPolyline) -> float:
    """Cauchy-Schwarz upper bound on the lightlike arrival time.

    This is also the time lapse that makes the reduced action vanish.
    """
    b = reduced_action(pi, x)
    if b.kinetic == 0.0:
        raise DegenerateCurve("arrival bound needs a non-constant spatial path")
    return b.A + float(np.sqrt((2.0 * b.mixed + b.h1) * b.B))


def coercivity_lower_bound(pi: ProblemInstance, x: SpatialPolyline) -> float:
    """Right-hand side ``|x'|^2 - dt (dt - 2A) / B``; always ``<= 2 J(x)``."""
    b = reduced_action(pi, x)
    dt = pi.delta_t
    return b.h1 - dt * (dt - 2.0 * b.A) / b.B


# -- finite-difference gradient ----------------------------------------------


def _contributions(st: StationarySpacetime, left, right, n: int):
    """Per-segment integrands for segments from ``left`` to ``right`` nodes."""
    step = minimal_image(right - left, st.base.period_array)
    v = n * step
    mid = left + 0.5 * step
    G, beta, delta = st.fields(mid, check_domain=False)
    gv = np.einsum("mij,mj->mi", G, v)
    speed2 = np.einsum("mi,mi->m", v, gv)
    dd = np.einsum("mi,mi->m", delta, gv)
    return np.stack([speed2, dd**2 / beta, dd / beta, 1.0 / beta], axis=1)


def _probe_steps(st: StationarySpacetime, X: np.ndarray, h_scale: float, max_halvings: int = 20) -> np.ndarray:
    """Per-entry steps for interior nodes, shrunk to keep probes in the domain.

    Entries still infeasible after ``max_halvings`` (nodes sitting on the
    boundary) keep the shrunk step; their probes evaluate the fields just
    outside the domain.
    """
    inner = X[1:-1]
    h = h_scale * np.maximum(1.0, np.abs(inner))
    if not st.base.constraints:
        return h
    per = st.base.period_array
    rows, cols = np.nonzero(np.ones_like(h, dtype=bool))
    for _ in range(max_halvings + 1):
        bad = np.zeros(rows.size, dtype=bool)
        for sign in (1.0, -1.0):
            y = inner[rows].copy()
            y[np.arange(rows.size), cols] += sign * h[rows, cols]
            ml = X[rows] + 0.5 * minimal_image(y - X[rows], per)
            mr = y + 0.5 * minimal_image(X[rows + 2] - y, per)
            bad |= ~(st.base.contains(y) & st.base.contains(ml) & st.base.contains(mr))
        rows, cols = rows[bad], cols[bad]
        if rows.size == 0:
            break
        h[rows, cols] *= 0.5
    return h


def gradient(pi: ProblemInstance, x: SpatialPolyline, h_scale: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``J`` w.r.t. every interior node coordinate.

    Perturbing node ``i`` only changes segments ``i-1`` and ``i``, so each
    probe updates the integral sums locally.  Returns shape ``(n-1, d)``.
    """
    _check_endpoints(pi, x)
    st = pi.spacetime
    X = np.asarray(x.nodes)
    n, d = x.n, x.dim
    if n < 2:
        return np.zeros((0, d))
    sf = segment_fields(st, x)
    base = np.stack([sf.speed2, sf.delta_dot**2 / sf.beta, sf.delta_dot / sf.beta, 1.0 / sf.beta], axis=1)
    h = _probe_steps(st, X, h_scale)

    inner = X[1:-1]
    ys, lefts, rights = [], [], []
    for sign in (1.0, -1.0):
        for k in range(d):
            y = inner.copy()
            y[:, k] += sign * h[:, k]
            ys.append(y)
            lefts.append(X[:-2])
            rights.append(X[2:])
    Y = np.concatenate(ys)
    seg_l = _contributions(st, np.concatenate(lefts), Y, n)
    seg_r = _contributions(st, Y, np.concatenate(rights), n)
    # shape (2 signs, d, n-1, 4)
    new = (seg_l + seg_r).reshape(2, d, n - 1, 4)
    old = (base[:-1] + base[1:])[None, None]
    plus, minus = new[0], new[1]

    dt = pi.delta_t
    S = base.sum(axis=0)
    a = S[2] / n - dt
    B = S[3] / n
    al_p = (plus[..., 2] - old[0, 0, :, 2]) / n
    al_m = (minus[..., 2] - old[0, 0, :, 2]) / n
    b_p = (plus[..., 3] - old[0, 0, :, 3]) / n
    b_m = (minus[..., 3] - old[0, 0, :, 3]) / n
    d_al = (plus[..., 2] - minus[..., 2]) / n

    linear = 0.5 * ((plus[..., 0] - minus[..., 0]) + (plus[..., 1] - minus[..., 1])) / n
    numer = (
        a * a * (b_m - b_p)
        + 2.0 * a * B * d_al
        + B * (al_p + al_m) * d_al
        + 2.0 * a * (al_p * b_m - al_m * b_p)
        + al_p**2 * b_m
        - al_m**2 * b_p
    )
    quad = -0.5 * numer / ((B + b_p) * (B + b_m))
    dJ = linear + quad  # (d, n-1)
    return (dJ / (2.0 * h.T)).T
