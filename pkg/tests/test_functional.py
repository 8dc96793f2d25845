import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statgeo.curves import straight_line
from statgeo.functional import (
    DegenerateCurve,
    ProblemInstance,
    arrival_upper_bound,
    full_action,
    gradient,
    lightlike_arrival,
    reduced_action,
    time_reconstruction,
)
from statgeo.metric import registry_get

from conftest import random_curve


def test_flat_closed_form():
    st_ = registry_get("minkowski_static", {"d": 2})
    pi = ProblemInstance(st_, [0.0, 0.0], 0.0, [1.0, 0.0], 2.0)
    b = reduced_action(pi, straight_line(pi.x_p, pi.x_q, 8))
    assert b.value == pytest.approx(-1.5, abs=1e-15)
    assert b.C_z == pytest.approx(-2.0, abs=1e-15)
    assert b.h1 == pytest.approx(1.0)


def test_lightlike_examples():
    flat = registry_get("minkowski_static", {"d": 1})
    pi = ProblemInstance(flat, [0.0], 0.0, [1.0], 0.0)
    x = straight_line([0.0], [1.0], 16)
    T, lift = lightlike_arrival(pi, x)
    assert T == pytest.approx(1.0) and arrival_upper_bound(pi, x) == pytest.approx(1.0)
    assert lift.times[-1] == pytest.approx(1.0)

    skew = registry_get("minkowski_skewed", {"delta": "0.5"})
    pi = ProblemInstance(skew, [0.0], 0.0, [2.0], 0.0)
    T, _ = lightlike_arrival(pi, straight_line([0.0], [2.0], 16))
    assert T == pytest.approx(1.0 + 2.0 * math.sqrt(1.25), rel=1e-14)


def test_constant_path_is_degenerate():
    flat = registry_get("minkowski_static", {"d": 1})
    pi = ProblemInstance(flat, [0.5], 0.0, [0.5], 1.0)
    x = straight_line([0.5], [0.5], 4)
    with pytest.raises(DegenerateCurve, match="non-constant"):
        lightlike_arrival(pi, x)
    with pytest.raises(DegenerateCurve):
        arrival_upper_bound(pi, x)


def test_endpoint_mismatch_rejected():
    flat = registry_get("minkowski_static", {"d": 1})
    pi = ProblemInstance(flat, [0.0], 0.0, [1.0], 1.0)
    with pytest.raises(ValueError):
        reduced_action(pi, straight_line([0.0], [2.0], 4))


def test_windings_only_on_periodic_coordinates():
    with pytest.raises(ValueError):
        ProblemInstance(registry_get("minkowski_static", {"d": 1}), [0.0], 0.0, [1.0], 1.0, (1,))
    cyl = registry_get("cylinder_static")
    pi = ProblemInstance(cyl, [0.0, 0.0], 0.0, [0.0, 0.0], 1.0, (2, 0))
    assert np.allclose(pi.target(), [4 * math.pi, 0.0])


def test_time_lift_hits_endpoints(problems):
    rng = np.random.default_rng(11)
    for pi in problems:
        z = time_reconstruction(pi, random_curve(pi, rng))
        assert z.times[0] == pi.t_p and z.times[-1] == pi.t_q
        assert full_action(pi, z) == pytest.approx(reduced_action(pi, z.spatial).value, abs=1e-10)


def test_time_reversal_symmetry():
    # J is invariant under (delta, dt) -> (-delta, -dt)
    a = registry_get("minkowski_skewed", {"delta": "x1"})
    b = registry_get("minkowski_skewed", {"delta": "-x1"})
    x = straight_line([0.0], [1.0], 16)
    x = x.with_nodes(x.nodes + 0.2 * np.sin(math.pi * x.params)[:, None])
    ja = reduced_action(ProblemInstance(a, [0.0], 0.0, [1.0], 1.5), x).value
    jb = reduced_action(ProblemInstance(b, [0.0], 0.0, [1.0], -1.5), x).value
    assert ja == pytest.approx(jb, rel=1e-14)


def _brute_gradient(pi, x, h=1e-6):
    out = np.zeros((x.n - 1, x.dim))
    for i in range(1, x.n):
        for k in range(x.dim):
            up, dn = x.nodes.copy(), x.nodes.copy()
            up[i, k] += h
            dn[i, k] -= h
            out[i - 1, k] = (reduced_action(pi, x.with_nodes(up)).value
                             - reduced_action(pi, x.with_nodes(dn)).value) / (2 * h)
    return out


def test_gradient_matches_brute_force(problems):
    rng = np.random.default_rng(5)
    for pi in problems:
        x = random_curve(pi, rng, n=12)
        g = gradient(pi, x)
        ref = _brute_gradient(pi, x)
        assert np.allclose(g, ref, rtol=1e-6, atol=1e-7 * max(1.0, np.abs(ref).max())), pi.spacetime.name


def test_gradient_vanishes_on_flat_straight_line():
    flat = registry_get("minkowski_static", {"d": 2})
    pi = ProblemInstance(flat, [0.0, 0.0], 0.0, [1.0, 2.0], 3.0)
    assert np.abs(gradient(pi, straight_line(pi.x_p, pi.x_q, 32))).max() < 1e-8


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-3.0, 3.0), st.floats(-2.0, 2.0), st.integers(2, 40))
def test_lightlike_lift_below_bound(c, dt, xq, n):
    skew = registry_get("minkowski_skewed", {"delta": repr(c)})
    pi = ProblemInstance(skew, [0.0], 0.0, [xq if abs(xq) > 1e-3 else 1.0], dt)
    x = straight_line(pi.x_p, pi.x_q, n)
    x = x.with_nodes(x.nodes + 0.3 * np.sin(2 * math.pi * x.params)[:, None])
    T, _ = lightlike_arrival(pi, x)
    assert T <= arrival_upper_bound(pi, x) * (1 + 1e-12)
