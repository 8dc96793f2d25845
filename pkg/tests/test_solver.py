import math

import numpy as np
import pytest

from statgeo.curves import curve_distance, straight_line
from statgeo.functional import ProblemInstance, reduced_action
from statgeo.metric import registry_get
from statgeo.solver import (
    NoFeasibleSeed,
    SeedSpec,
    SolveConfig,
    default_threads,
    minimize,
    multistart,
    repair,
    seed_curves,
    winding_offsets,
)


def _flat():
    return ProblemInstance(registry_get("minkowski_static", {"d": 2}), [0.0, 0.0], 0.0, [1.0, 0.0], 2.0)


def _bumped(pi, n, amp):
    line = straight_line(pi.x_p, pi.target(), n, pi.spacetime.base.periods)
    return line.with_nodes(line.nodes + amp * np.sin(math.pi * line.params)[:, None])


def test_converges_to_straight_line():
    pi = _flat()
    rep = minimize(pi, _bumped(pi, 64, 0.3))
    assert rep.status == "converged"
    assert curve_distance(rep.curve, straight_line(pi.x_p, pi.x_q, 64)) < 1e-8
    assert rep.character == "timelike"
    assert rep.traces["J"][0] > rep.traces["J"][-1]


def test_energy_is_monotone_along_descent():
    st = registry_get("minkowski_skewed", {"delta": "x1"})
    pi = ProblemInstance(st, [0.0], 0.0, [1.0], 1.0)
    rep = minimize(pi, _bumped(pi, 64, 0.5))
    J = np.array(rep.traces["J"])
    assert np.all(np.diff(J) <= 1e-12 * (1 + np.abs(J[:-1])))


def test_unpreconditioned_descent_reaches_minimum():
    # plain Euclidean steps are badly conditioned: J reaches its minimum but the
    # dual gradient norm creeps along at the roundoff floor
    pi = ProblemInstance(registry_get("minkowski_static", {"d": 1}), [0.0], 0.0, [1.0], 2.0)
    rep = minimize(pi, _bumped(pi, 8, 0.2), SolveConfig(n=8, preconditioner="none", max_iters=5000))
    assert rep.status in ("converged", "stalled")
    assert rep.value == pytest.approx(0.5 - 2.0, abs=1e-12)


def test_max_iters_status():
    pi = _flat()
    rep = minimize(pi, _bumped(pi, 64, 0.3), SolveConfig(n=64, max_iters=1, preconditioner="none"))
    assert rep.status == "max_iters"
    assert rep.iterations == 1


def test_boundary_escape_near_obstacle():
    st = registry_get("excised_disk_static")
    pi = ProblemInstance(st, [-1.05, 0.0], 0.0, [1.05, 0.0], 0.0)
    seeds = seed_curves(pi, 64)
    rep = minimize(pi, seeds[0][1], SolveConfig(n=64))
    assert rep.status == "boundary_escape"
    assert min(rep.traces["boundary_distance"]) <= 1e-3


def test_repair_moves_seed_off_obstacle():
    st = registry_get("excised_disk_static")
    pi = ProblemInstance(st, [-2.0, 0.0], 0.0, [2.0, 0.0], 0.0)
    fixed = repair(pi, straight_line(pi.x_p, pi.x_q, 32))
    assert np.all(st.base.contains(fixed.nodes))
    assert np.allclose(fixed.nodes[[0, -1]], [pi.x_p, pi.x_q])


def test_no_feasible_seed():
    # the slab x1 in (-inf, -1] U [1, inf) disconnects the endpoints
    from statgeo.metric import build_spacetime

    st = build_spacetime(["x1"], [["1"]], "1", ["0"], domain=["x1^2 - 1"], base_point=[2.0])
    pi = ProblemInstance(st, [-2.0], 0.0, [2.0], 1.0)
    with pytest.raises(NoFeasibleSeed):
        seed_curves(pi, 8)


def test_seed_counts_and_windings():
    cyl = registry_get("cylinder_static")
    pi = ProblemInstance(cyl, [0.0, 0.0], 0.0, [0.0, 0.0], 5.0)
    spec = SeedSpec(count=2, winding_range=2)
    assert len(winding_offsets(pi, spec)) == 5
    seeds = seed_curves(pi, 16, spec)
    assert len(seeds) == 15
    labels = [lbl for lbl, _ in seeds]
    assert len(set(labels)) == len(labels)


def test_multistart_dedupes_and_is_reproducible():
    pi = _flat()
    cfg = SolveConfig(n=32, seeds=SeedSpec(count=3), threads=1)
    a = multistart(pi, cfg)
    assert sum(r.converged for r in a) == 1
    b = multistart(pi, SolveConfig(n=32, seeds=SeedSpec(count=3), threads=4))
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_report_dict_fields():
    pi = _flat()
    rep = minimize(pi, _bumped(pi, 16, 0.1), SolveConfig(n=16))
    d = rep.to_dict(include_traces=False)
    assert d["status"] == "converged" and "traces" not in d
    assert d["J"] == pytest.approx(reduced_action(pi, rep.curve).value)
    assert set(d["ps_diagnostics"]) == {"h1_initial", "h1_final", "boundary_distance_min", "base_point_distance_max"}


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("STATGEO_THREADS", "1")
    assert default_threads() == 1
    monkeypatch.setenv("STATGEO_THREADS", "junk")
    assert default_threads() >= 1
