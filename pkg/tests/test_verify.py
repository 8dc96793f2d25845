import math

import numpy as np
import pytest

from statgeo.curves import SpacetimePolyline, straight_line
from statgeo.functional import ProblemInstance, time_reconstruction
from statgeo.metric import build_spacetime, registry_get
from statgeo.solver import SolveConfig, minimize
from statgeo.verify import (
    ProbeSpec,
    SamplingSpec,
    christoffel,
    conformal_completeness_probe,
    conservation_check,
    diagnose,
    geodesic_residual,
    growth_bounds,
    verify_curve,
)


def test_christoffel_skewed_closed_form():
    # L = [[1, x], [x, -1]]: only d_x L_xt = 1 is non-zero
    st = registry_get("minkowski_skewed", {"delta": "x1"})
    x = 0.7
    G = christoffel(st, np.array([[x]]))[0]
    Linv = np.linalg.inv(np.array([[1.0, x], [x, -1.0]]))
    first = np.zeros((2, 2, 2))
    first[1, 0, 0] = 1.0  # [t; x x] = d_x L_xt; [x; x t] cancels
    assert np.allclose(G, np.einsum("ad,dbc->abc", Linv, first), atol=1e-9)


def test_christoffel_polar_like_metric():
    st = build_spacetime(["x1", "x2"], [["1", "0"], ["0", "x1^2"]], "1", ["0", "0"],
                         domain=["x1 - 0.1"], base_point=[1.0, 0.0])
    G = christoffel(st, np.array([[2.0, 0.3]]))[0]
    assert G[0, 1, 1] == pytest.approx(-2.0, abs=1e-8)
    assert G[1, 0, 1] == pytest.approx(0.5, abs=1e-8)


def _solved(n=128):
    st = registry_get("minkowski_skewed", {"delta": "x1"})
    pi = ProblemInstance(st, [0.0], 0.0, [1.0], 1.0)
    line = straight_line([0.0], [1.0], n)
    rep = minimize(pi, line.with_nodes(line.nodes + 0.2 * np.sin(math.pi * line.params)[:, None]), SolveConfig(n=n))
    return st, time_reconstruction(pi, rep.curve)


def test_verify_passes_solver_output_and_catches_corruption():
    st, z = _solved()
    rep = verify_curve(st, z)
    assert rep.passed, rep.to_dict()
    nodes = np.array(z.spatial.nodes)
    nodes[40, 0] += 1e-3
    bad = SpacetimePolyline(z.spatial.with_nodes(nodes), z.times)
    rep_bad = verify_curve(st, bad)
    assert not rep_bad.passed
    assert rep_bad.max_residual > 1e-3


def test_non_geodesic_has_large_residual():
    st = registry_get("minkowski_static", {"d": 1})
    pi = ProblemInstance(st, [0.0], 0.0, [1.0], 2.0)
    x = straight_line([0.0], [1.0], 32)
    x = x.with_nodes(x.nodes + 0.1 * np.sin(math.pi * x.params)[:, None])
    z = time_reconstruction(pi, x)
    assert geodesic_residual(st, z) > 0.5
    cz, _ = conservation_check(st, z)
    assert cz < 1e-12  # the time lift enforces the Killing constraint on any curve


def test_growth_bounds_flat_and_radial():
    flat = growth_bounds(registry_get("minkowski_static", {"d": 2}))
    assert flat.beta_exponent == pytest.approx(0.0, abs=1e-12)
    quad = growth_bounds(registry_get("radial_static", {"beta": "1 + r^2"}))
    assert quad.beta_exponent == pytest.approx(2.0, abs=0.05) and quad.quad_ok
    cubic = growth_bounds(registry_get("radial_static", {"beta": "1 + r^3"}))
    assert not cubic.quad_ok


def test_growth_bounds_partial_fit_on_boundary():
    st = registry_get("excised_disk_static")
    diag = growth_bounds(st, SamplingSpec(r_min=0.5, r_max=50.0))
    exited = [r for r in diag.rays if r.exited_domain_at is not None]
    assert exited and any("leaves the domain" in w for w in diag.warnings)


def test_conformal_probe_verdicts():
    flat = conformal_completeness_probe(registry_get("minkowski_static", {"d": 2}))
    assert all(r.verdict == "diverges" for r in flat)
    steep = conformal_completeness_probe(registry_get("radial_static", {"beta": "1 + r^4"}))
    assert all(r.verdict == "converges" for r in steep)
    assert all(r.conformal_length < 3.0 for r in steep)
    disk = conformal_completeness_probe(registry_get("excised_disk_static"), ProbeSpec(directions=((-1.0, 0.0),)))
    assert disk[0].verdict == "boundary"
    assert disk[0].reached_radius == pytest.approx(1.0, abs=1e-9)
    assert disk[0].conformal_length == pytest.approx(1.0, abs=1e-6)


def test_diagnose_warns_for_nonzero_delta():
    diag = diagnose(registry_get("minkowski_skewed", {"delta": "1"}))
    assert any("delta = 0" in w for w in diag.warnings)
    assert not diagnose(registry_get("minkowski_static", {"d": 1})).warnings
