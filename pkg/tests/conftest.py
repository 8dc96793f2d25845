import math

import numpy as np
import pytest

from statgeo.curves import straight_line
from statgeo.functional import ProblemInstance
from statgeo.metric import DomainViolation, registry_get


def _fixtures():
    return [
        ("minkowski_static", {"d": 2}, [0.0, 0.0], [1.0, 0.5], 2.0),
        ("minkowski_skewed", {"delta": "x1"}, [0.0], [1.0], 1.0),
        ("minkowski_skewed", {"delta": "0.5"}, [0.0], [2.0], 3.0),
        ("circle_static", {}, [0.0], [1.0], 4.0),
        ("cylinder_static", {}, [0.0, 0.0], [1.0, 1.0], 5.0),
        ("excised_disk_static", {"beta": "1 + 1/r"}, [2.0, 0.0], [0.0, 2.5], 6.0),
        ("radial_static", {"beta": "1 + r^2"}, [-1.0, 0.5], [1.5, -0.5], 3.0),
    ]


@pytest.fixture(scope="session")
def problems():
    """Problem instances built from every registry spacetime."""
    out = []
    for name, params, xp, xq, dt in _fixtures():
        st = registry_get(name, params)
        out.append(ProblemInstance(st, xp, 0.0, xq, dt))
    return out


def random_curve(pi: ProblemInstance, rng: np.random.Generator, n: int = 32, amp: float = 0.4):
    """Straight line plus random low sine modes, resampled until it stays in the domain."""
    line = straight_line(pi.x_p, pi.target(), n, pi.spacetime.base.periods)
    s = line.params[:, None]
    d = pi.spacetime.dim
    for _ in range(100):
        bump = sum(
            rng.normal(scale=amp / k, size=d) * np.sin(k * math.pi * s) for k in range(1, 4)
        )
        c = line.with_nodes(line.nodes + bump)
        try:
            pi.spacetime.base.require(c.nodes)
            pi.spacetime.base.require(c.midpoints())
            return c
        except DomainViolation:
            amp *= 0.7
    return line


# -- one PASS/FAIL line per acceptance criterion ------------------------------------

_criteria: dict[str, list] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        key = name.split("_")[2]
        _criteria.setdefault(key, []).append((name, report.outcome, report.longreprtext if report.failed else ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria):
        runs = _criteria[key]
        ok = all(outcome == "passed" for _, outcome, _ in runs)
        label = runs[0][0].split("_", 3)[-1].split("[")[0].replace("_", " ")
        terminalreporter.write_line(f"criterion {int(key):2d} {label}: {'PASS' if ok else 'FAIL'}")
        for name, outcome, text in runs:
            if outcome != "passed":
                last = [ln for ln in text.splitlines() if ln.startswith("E ")]
                terminalreporter.write_line(f"    {name}: {last[0][1:].strip() if last else outcome}")
