"""Uniform-parameter polylines and the midpoint quadratures built on them.

Node ``i`` sits at parameter ``s_i = i/n``.  Velocities are constant on each
segment and every field is sampled at segment midpoints, so every integral
over ``[0, 1]`` becomes ``(1/n) * sum_i F(m_i, v_i)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .metric import StationarySpacetime, minimal_image

INTEGRAL_KINDS = ("delta_dot_over_beta", "delta_dot_sq_over_beta", "one_over_beta", "riemann_length")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpatialPolyline:
    nodes: np.ndarray  # (n+1, d)
    periods: np.ndarray  # (d,), 0 marks a line coordinate

    def __init__(self, nodes, periods: Optional[Sequence[Optional[float]]] = None):
        arr = np.array(nodes, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ValueError("a polyline needs at least two nodes")
        d = arr.shape[1]
        per = np.zeros(d) if periods is None else np.array([p or 0.0 for p in periods], dtype=float)
        if per.shape != (d,):
            raise ValueError("periods must match the dimension")
        object.__setattr__(self, "nodes", _frozen(arr))
        object.__setattr__(self, "periods", _frozen(per))

    @property
    def n(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def params(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n + 1)

    def steps(self) -> np.ndarray:
        return minimal_image(np.diff(self.nodes, axis=0), self.periods)

    def velocities(self) -> np.ndarray:
        return self.n * self.steps()

    def midpoints(self) -> np.ndarray:
        return self.nodes[:-1] + 0.5 * self.steps()

    def unwrapped(self) -> np.ndarray:
        """Nodes re-expressed continuously on the covering space."""
        return np.vstack([self.nodes[:1], self.nodes[0] + np.cumsum(self.steps(), axis=0)])

    def with_nodes(self, nodes) -> "SpatialPolyline":
        return SpatialPolyline(nodes, self.periods)

    def reversed(self) -> "SpatialPolyline":
        return SpatialPolyline(self.nodes[::-1], self.periods)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpatialPolyline)
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.periods, other.periods)
        )


@dataclass(frozen=True, eq=False)
class SpacetimePolyline:
    spatial: SpatialPolyline
    times: np.ndarray  # (n+1,)

    def __init__(self, spatial: SpatialPolyline, times):
        t = np.array(times, dtype=float).reshape(-1)
        if t.shape[0] != spatial.n + 1:
            raise ValueError("time samples must match the node count")
        object.__setattr__(self, "spatial", spatial)
        object.__setattr__(self, "times", _frozen(t))

    @property
    def n(self) -> int:
        return self.spatial.n

    @property
    def dim(self) -> int:
        return self.spatial.dim

    def velocities(self) -> np.ndarray:
        """Segment tangents ``(xi, tau)`` of shape ``(n, d+1)``."""
        return np.hstack([self.spatial.velocities(), (self.n * np.diff(self.times))[:, None]])

    def midpoints(self) -> np.ndarray:
        return self.spatial.midpoints()

    def reversed(self) -> "SpacetimePolyline":
        return SpacetimePolyline(self.spatial.reversed(), self.times[::-1])


def straight_line(x_start, x_end, n: int, periods=None) -> SpatialPolyline:
    """Chart straight line; ``x_end`` is taken literally (no wrapping)."""
    a = np.atleast_1d(np.asarray(x_start, dtype=float))
    b = np.atleast_1d(np.asarray(x_end, dtype=float))
    s = np.linspace(0.0, 1.0, int(n) + 1)[:, None]
    return SpatialPolyline(a + s * (b - a), periods)


def segment_velocity(c: SpatialPolyline, i: int) -> np.ndarray:
    if not 0 <= i < c.n:
        raise IndexError(f"segment index {i} out of range for n={c.n}")
    return c.n * minimal_image(c.nodes[i + 1] - c.nodes[i], c.periods)


@dataclass(frozen=True)
class SegmentFields:
    """Per-segment data every functional is assembled from."""

    velocity: np.ndarray  # (n, d)
    midpoint: np.ndarray  # (n, d)
    g: np.ndarray  # (n, d, d)
    beta: np.ndarray  # (n,)
    delta: np.ndarray  # (n, d)
    speed2: np.ndarray  # g(v, v)
    delta_dot: np.ndarray  # g(delta, v)


def segment_fields(st: StationarySpacetime, c: SpatialPolyline) -> SegmentFields:
    st.base.require(c.nodes)
    v = c.velocities()
    mid = c.midpoints()
    G, beta, delta = st.fields(mid)
    gv = np.einsum("nij,nj->ni", G, v)
    return SegmentFields(
        v, mid, G, beta, delta,
        np.einsum("ni,ni->n", v, gv),
        np.einsum("ni,ni->n", delta, gv),
    )


def h1_energy(st: StationarySpacetime, c: SpatialPolyline) -> float:
    """Midpoint value of ``int_0^1 g(x', x') ds``."""
    return float(np.mean(segment_fields(st, c).speed2))


def integrate_along(st: StationarySpacetime, c: SpatialPolyline, kind: str) -> float:
    sf = segment_fields(st, c)
    if kind == "delta_dot_over_beta":
        vals = sf.delta_dot / sf.beta
    elif kind == "delta_dot_sq_over_beta":
        vals = sf.delta_dot**2 / sf.beta
    elif kind == "one_over_beta":
        vals = 1.0 / sf.beta
    elif kind == "riemann_length":
        vals = np.sqrt(np.maximum(sf.speed2, 0.0))
    else:
        raise ValueError(f"unknown integral kind {kind!r}; expected one of {INTEGRAL_KINDS}")
    return float(np.mean(vals))


def curve_distance(a: SpatialPolyline, b: SpatialPolyline) -> float:
    if a.nodes.shape != b.nodes.shape:
        raise ValueError(f"mismatched discretizations {a.nodes.shape} vs {b.nodes.shape}")
    diff = minimal_image(a.nodes - b.nodes, a.periods)
    return float(np.max(np.linalg.norm(diff, axis=1)))


def resample(c: SpatialPolyline, m: int) -> SpatialPolyline:
    """Piecewise-linear reparameterization onto ``m`` uniform segments."""
    m = int(m)
    if m < 1:
        raise ValueError("segment count must be at least 1")
    if m == c.n:
        return c
    u = c.unwrapped()
    s_old = c.params
    s_new = np.linspace(0.0, 1.0, m + 1)
    nodes = np.column_stack([np.interp(s_new, s_old, u[:, k]) for k in range(c.dim)])
    nodes[0], nodes[-1] = u[0], u[-1]
    return SpatialPolyline(nodes, c.periods)


# -- CSV --------------------------------------------------------------------


def curve_columns(d: int, with_time: bool) -> list[str]:
    return ["s"] + [f"x{k + 1}" for k in range(d)] + (["t"] if with_time else [])


def write_curve_csv(path, curve) -> None:
    """Write ``s, x1..xd[, t]``, one row per node."""
    if isinstance(curve, SpacetimePolyline):
        spatial, times = curve.spatial, curve.times
    else:
        spatial, times = curve, None
    cols = curve_columns(spatial.dim, times is not None)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i, s in enumerate(spatial.params):
            row = [s, *spatial.nodes[i]]
            if times is not None:
                row.append(times[i])
            w.writerow([repr(float(v)) for v in row])


def read_curve_csv(path, d: int, periods=None):
    """Read a curve written by :func:`write_curve_csv`.

    Returns a :class:`SpacetimePolyline` when a ``t`` column is present,
    otherwise a :class:`SpatialPolyline`.
    """
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("curve CSV is empty")
    header, body = [h.strip() for h in rows[0]], [r for r in rows[1:] if r]
    with_time = header == curve_columns(d, True)
    if not with_time and header != curve_columns(d, False):
        raise ValueError(
            f"curve CSV columns {header} do not match {curve_columns(d, False)} (optionally with 't')"
        )
    if len(body) < 2:
        raise ValueError("curve CSV needs at least two node rows")
    data = np.array([[float(v) for v in r] for r in body])
    if data.shape[1] != len(header):
        raise ValueError("ragged curve CSV")
    n = data.shape[0] - 1
    if not np.allclose(data[:, 0], np.linspace(0.0, 1.0, n + 1), atol=1e-9):
        raise ValueError("column 's' must be the uniform parameter i/n")
    spatial = SpatialPolyline(data[:, 1 : 1 + d], periods)
    if with_time:
        return SpacetimePolyline(spatial, data[:, -1])
    return spatial
