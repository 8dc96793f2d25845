"""Standard stationary metrics on a single-chart base manifold.

A spacetime here is ``M0 x R`` with line element

    <xi, xi> + 2 <delta(x), xi> dt - beta(x) dt^2

where ``<.,.>`` is the Riemannian metric ``g`` of the base.  ``delta`` is stored
by its vector components in the chart and paired with velocities through
``g``.  The Killing field is ``K = d/dt``, i.e. the last basis vector of the
``(d+1)``-dimensional tangent space, and the future cone is the one where
``<zeta, K>_L < 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .field_expr import (
    Binary,
    Const,
    ExpressionDomainError,
    FieldExpr,
    Unary,
    Var,
    constant,
    parse,
    substitute,
)

LIGHTLIKE_EPS = 1e-9


class DomainViolation(ValueError):
    """A point lies outside the chart domain or a field is undefined there."""


class InvalidSpacetime(ValueError):
    """The supplied fields violate the metric invariants."""


def default_coords(d: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(d))


@dataclass(frozen=True)
class ChartManifold:
    """Single-chart base manifold with inequality-defined domain.

    ``constraints`` are expressions that must be ``>= 0`` on the domain.
    ``periods[i]`` is ``None`` for a line coordinate or the period of an
    ``S^1`` factor.
    """

    coords: tuple[str, ...]
    constraints: tuple[FieldExpr, ...] = ()
    periods: tuple[Optional[float], ...] = ()
    base_point: tuple[float, ...] = ()

    def __post_init__(self):
        d = len(self.coords)
        if d < 1:
            raise InvalidSpacetime("dimension must be at least 1")
        if not self.periods:
            object.__setattr__(self, "periods", (None,) * d)
        if not self.base_point:
            object.__setattr__(self, "base_point", (0.0,) * d)
        if len(self.periods) != d or len(self.base_point) != d:
            raise InvalidSpacetime("periods and base point must match the dimension")
        for p in self.periods:
            if p is not None and not p > 0:
                raise InvalidSpacetime("periods must be positive")
        if not self.contains(np.asarray(self.base_point)[None, :])[0]:
            raise InvalidSpacetime("base point lies outside the domain")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def period_array(self) -> np.ndarray:
        """Periods with ``0`` marking non-periodic coordinates."""
        return np.array([p or 0.0 for p in self.periods])

    def constraint_values(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.constraints:
            return np.full((pts.shape[0], 0), np.inf)
        try:
            return np.stack([c(pts) for c in self.constraints], axis=1)
        except ExpressionDomainError as exc:
            raise DomainViolation(str(exc)) from exc

    def contains(self, points: np.ndarray) -> np.ndarray:
        vals = self.constraint_values(points)
        return np.all(vals >= 0.0, axis=1) & np.all(np.isfinite(np.atleast_2d(points)), axis=1)

    def require(self, points: np.ndarray) -> None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = self.contains(pts)
        if not np.all(ok):
            bad = pts[np.argmin(ok)]
            raise DomainViolation(f"point {bad.tolist()} lies outside the chart domain")

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """First-order distance estimate ``c(x) / |grad c(x)|`` to the boundary."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.constraints:
            return np.full(pts.shape[0], np.inf)
        m, d = pts.shape
        out = np.full(m, np.inf)
        steps = 1e-6 * np.maximum(1.0, np.abs(pts))
        for c in self.constraints:
            if c.is_constant():
                continue
            val = c(pts)
            grad = np.empty((m, d))
            for k in range(d):
                e = np.zeros(d)
                e[k] = 1.0
                grad[:, k] = (c(pts + steps[:, k:k + 1] * e) - c(pts - steps[:, k:k + 1] * e)) / (
                    2 * steps[:, k]
                )
            gn = np.linalg.norm(grad, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                dist = np.where(gn > 1e-300, val / gn, np.where(val >= 0, np.inf, -np.inf))
            out = np.minimum(out, dist)
        return out

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Minimal-image ``b - a`` on periodic coordinates."""
        diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        return minimal_image(diff, self.period_array)


def minimal_image(diff: np.ndarray, periods: np.ndarray) -> np.ndarray:
    periods = np.asarray(periods, dtype=float)
    if not np.any(periods > 0):
        return diff
    P = np.where(periods > 0, periods, 1.0)
    wrapped = diff - P * np.round(diff / P)
    return np.where(periods > 0, wrapped, diff)


@dataclass(frozen=True)
class CausalClass:
    character: str  # "timelike" | "lightlike" | "spacelike"
    orientation: str  # "future" | "past" | "none"

    @property
    def causal(self) -> bool:
        return self.character != "spacelike"


@dataclass(frozen=True)
class StationarySpacetime:
    base: ChartManifold
    g: tuple[tuple[FieldExpr, ...], ...]
    beta: FieldExpr
    delta: tuple[FieldExpr, ...]
    name: str = "inline"
    description: str = field(default="", compare=False)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def coords(self) -> tuple[str, ...]:
        return self.base.coords

    def fields(self, points, check_domain: bool = True):
        """Evaluate ``(g, beta, delta)`` at an ``(m, d)`` array of points.

        Returns arrays of shapes ``(m, d, d)``, ``(m,)`` and ``(m, d)``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if check_domain:
            self.base.require(pts)
        m, d = pts.shape
        try:
            G = np.empty((m, d, d))
            for i in range(d):
                for j in range(d):
                    G[:, i, j] = self.g[i][j](pts)
            beta = self.beta(pts)
            delta = np.stack([c(pts) for c in self.delta], axis=1)
        except ExpressionDomainError as exc:
            raise DomainViolation(str(exc)) from exc
        return G, beta, delta

    def validate(self, points=None, n_samples: int = 64, radius: float = 4.0, seed: int = 0) -> None:
        """Probe the metric invariants on a sample of domain points."""
        pts = sample_domain(self.base, n_samples, radius, seed) if points is None else np.atleast_2d(points)
        G, beta, delta = self.fields(pts)
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
            bad = pts[np.argmin(np.where(np.isfinite(beta), beta, -np.inf))]
            raise InvalidSpacetime(f"beta must be positive (fails at {bad.tolist()})")
        if not np.allclose(G, np.swapaxes(G, 1, 2), rtol=1e-12, atol=1e-14):
            raise InvalidSpacetime("spatial metric g must be symmetric")
        if not np.all(np.isfinite(G)) or np.any(np.linalg.eigvalsh(G)[:, 0] <= 0):
            raise InvalidSpacetime("spatial metric g must be positive definite")
        if not np.all(np.isfinite(delta)):
            raise InvalidSpacetime("delta must be finite")
        L = lorentz_metrics(self, pts)
        neg = np.sum(np.linalg.eigvalsh(L) < 0, axis=1)
        if np.any(neg != 1):
            raise InvalidSpacetime("Lorentzian metric must have signature (d, 1)")


def sample_domain(base: ChartManifold, n: int, radius: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    center = np.asarray(base.base_point, dtype=float)
    periods = base.period_array
    out = [center]
    tries = 0
    while len(out) < n and tries < 200:
        tries += 1
        cand = center + rng.uniform(-radius, radius, size=(4 * n, base.dim))
        cand = np.where(periods > 0, center + rng.uniform(0, 1, size=cand.shape) * periods, cand)
        cand = cand[base.contains(cand)]
        out.extend(cand[: n - len(out)])
    return np.array(out)


# -- metric tensors -----------------------------------------------------------


def lorentz_metrics(st: StationarySpacetime, points) -> np.ndarray:
    G, beta, delta = st.fields(points)
    m, d = delta.shape
    L = np.zeros((m, d + 1, d + 1))
    L[:, :d, :d] = G
    gd = np.einsum("mij,mj->mi", G, delta)
    L[:, :d, d] = gd
    L[:, d, :d] = gd
    L[:, d, d] = -beta
    return L


def comparison_metrics(st: StationarySpacetime, points) -> np.ndarray:
    L = lorentz_metrics(st, points)
    lk = L[:, :, -1]  # <., K>_L as a covector
    kk = L[:, -1, -1]
    return L - 2.0 * np.einsum("mi,mj->mij", lk, lk) / kk[:, None, None]


def lorentz_metric_at(st: StationarySpacetime, x) -> np.ndarray:
    return lorentz_metrics(st, np.asarray(x, dtype=float)[None, :])[0]


def comparison_metric_at(st: StationarySpacetime, x) -> np.ndarray:
    return comparison_metrics(st, np.asarray(x, dtype=float)[None, :])[0]


def conformal_metric_at(st: StationarySpacetime, x) -> np.ndarray:
    G, beta, _ = st.fields(np.asarray(x, dtype=float)[None, :])
    return G[0] / beta[0]


def classify_tangents(st: StationarySpacetime, points, zetas) -> list[CausalClass]:
    zetas = np.atleast_2d(np.asarray(zetas, dtype=float))
    L = lorentz_metrics(st, points)
    R = comparison_metrics(st, points)
    q = np.einsum("mi,mij,mj->m", zetas, L, zetas)
    r = np.einsum("mi,mij,mj->m", zetas, R, zetas)
    k = np.einsum("mi,mi->m", zetas, L[:, :, -1])
    out = []
    for qi, ri, ki in zip(q, r, k):
        eps = LIGHTLIKE_EPS * ri
        if ri == 0.0 or qi > eps or ki == 0.0:
            out.append(CausalClass("spacelike", "none"))
            continue
        character = "lightlike" if abs(qi) <= eps else "timelike"
        out.append(CausalClass(character, "future" if ki < 0 else "past"))
    return out


def classify_tangent(st: StationarySpacetime, x, zeta) -> CausalClass:
    return classify_tangents(st, np.asarray(x, dtype=float)[None, :], zeta)[0]


# -- construction helpers and registry ---------------------------------------


def build_spacetime(
    coords: Sequence[str],
    g: Sequence[Sequence[str]],
    beta: str,
    delta: Sequence[str],
    domain: Sequence[str] = (),
    periods: Sequence[Optional[float]] | None = None,
    base_point: Sequence[float] | None = None,
    name: str = "inline",
    description: str = "",
    validate: bool = True,
) -> StationarySpacetime:
    """Assemble a spacetime from expression strings."""
    coords = tuple(coords)
    d = len(coords)
    if len(g) != d or any(len(row) != d for row in g):
        raise InvalidSpacetime(f"g must be a {d}x{d} matrix of expressions")
    if len(delta) != d:
        raise InvalidSpacetime(f"delta must have {d} components")

    def px(s) -> FieldExpr:
        if isinstance(s, (int, float)):
            return constant(float(s), coords)
        return parse(s, coords)

    base = ChartManifold(
        coords,
        tuple(px(c) for c in domain),
        tuple(periods) if periods is not None else (None,) * d,
        tuple(float(v) for v in base_point) if base_point is not None else (0.0,) * d,
    )
    st = StationarySpacetime(
        base,
        tuple(tuple(px(s) for s in row) for row in g),
        px(beta),
        tuple(px(s) for s in delta),
        name,
        description,
    )
    if validate:
        st.validate()
    return st


def _identity(d: int) -> list[list[str]]:
    return [["1" if i == j else "0" for j in range(d)] for i in range(d)]


def _radius_node(coords: Sequence[str]):
    terms = [Binary("^", Var(c, i), Const(2.0)) for i, c in enumerate(coords)]
    acc = terms[0]
    for t in terms[1:]:
        acc = Binary("+", acc, t)
    return Unary("sqrt", acc)


def _radial_expr(text: str, coords: Sequence[str]) -> FieldExpr:
    """Parse ``text`` allowing the extra symbol ``r = |x|``."""
    e = parse(text, tuple(coords) + ("r",))
    return substitute(e, "r", _radius_node(coords), coords)


def _minkowski_static(d: int = 2) -> StationarySpacetime:
    d = int(d)
    if d < 1:
        raise InvalidSpacetime("d must be a positive integer")
    return build_spacetime(
        default_coords(d), _identity(d), "1", ["0"] * d,
        name="minkowski_static", description="flat R^d x R, g = I, beta = 1, delta = 0",
    )


def _minkowski_skewed(delta: str = "x1") -> StationarySpacetime:
    return build_spacetime(
        ("x1",), [["1"]], "1", [delta],
        name="minkowski_skewed",
        description="flat 2-d Minkowski written as dx^2 + 2 delta(x) dx dt - dt^2",
    )


def _circle_static() -> StationarySpacetime:
    return build_spacetime(
        ("x1",), [["1"]], "1", ["1"], periods=[2 * math.pi],
        name="circle_static", description="S^1 x R with d(theta)^2 + 2 dt d(theta) - dt^2",
    )


def _cylinder_static(circumference: float = 2 * math.pi) -> StationarySpacetime:
    c = float(circumference)
    if not c > 0:
        raise InvalidSpacetime("circumference must be positive")
    return build_spacetime(
        ("x1", "x2"), _identity(2), "1", ["0", "0"], periods=[c, None],
        name="cylinder_static", description="flat cylinder S^1 x R (x1 periodic) times time",
    )


def _excised_disk_static(radius: float = 1.0, beta: str = "1") -> StationarySpacetime:
    r = float(radius)
    if not r > 0:
        raise InvalidSpacetime("radius must be positive")
    coords = ("x1", "x2")
    st = build_spacetime(
        coords, _identity(2), "1", ["0", "0"],
        domain=[f"x1^2 + x2^2 - {r!r}^2"], base_point=[2 * r, 0.0],
        name="excised_disk_static", description="R^2 minus the closed disk |x| < radius",
        validate=False,
    )
    st = StationarySpacetime(st.base, st.g, _radial_expr(beta, coords), st.delta, st.name, st.description)
    st.validate(radius=4 * r)
    return st


def _radial_static(beta: str = "1", d: int = 2, inner_radius: float | None = None) -> StationarySpacetime:
    d = int(d)
    coords = default_coords(d)
    domain, bp = [], [0.0] * d
    if inner_radius is not None:
        r0 = float(inner_radius)
        domain = [" + ".join(f"{c}^2" for c in coords) + f" - {r0!r}^2"]
        bp[0] = 2 * r0
    st = build_spacetime(
        coords, _identity(d), "1", ["0"] * d, domain=domain, base_point=bp,
        name="radial_static", description="static g = I with radial beta(r)", validate=False,
    )
    st = StationarySpacetime(st.base, st.g, _radial_expr(beta, coords), st.delta, st.name, st.description)
    if inner_radius is not None:
        # strict inequality at the horizon-like boundary is not representable; probe off it
        pts = sample_domain(st.base, 64, 4 * float(inner_radius), 0)
        pts = pts[np.linalg.norm(pts, axis=1) > float(inner_radius) * (1 + 1e-9)]
        st.validate(points=pts)
    else:
        st.validate()
    return st


REGISTRY: dict[str, dict[str, Any]] = {
    "minkowski_static": {"factory": _minkowski_static, "params": {"d": 2}},
    "minkowski_skewed": {"factory": _minkowski_skewed, "params": {"delta": "x1"}},
    "circle_static": {"factory": _circle_static, "params": {}},
    "cylinder_static": {"factory": _cylinder_static, "params": {"circumference": 2 * math.pi}},
    "excised_disk_static": {"factory": _excised_disk_static, "params": {"radius": 1.0, "beta": "1"}},
    "radial_static": {"factory": _radial_static, "params": {"beta": "1", "d": 2, "inner_radius": None}},
}


def registry_get(name: str, params: dict | None = None) -> StationarySpacetime:
    if name not in REGISTRY:
        raise KeyError(f"unknown spacetime {name!r}; known: {sorted(REGISTRY)}")
    entry = REGISTRY[name]
    params = dict(params or {})
    unknown = set(params) - set(entry["params"])
    if unknown:
        raise InvalidSpacetime(f"invalid parameters for {name}: {sorted(unknown)}")
    return entry["factory"](**params)


def list_spacetimes() -> list[dict]:
    out = []
    for name, entry in REGISTRY.items():
        doc = entry["factory"]
        st_desc = ""
        try:
            st_desc = registry_get(name).description
        except (InvalidSpacetime, ValueError):
            pass
        out.append({"name": name, "params": dict(entry["params"]), "description": st_desc or doc.__name__})
    return out
