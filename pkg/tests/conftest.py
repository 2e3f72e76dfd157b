import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from afc.graph import BaseTopology, two_clique_fixture
from afc.kernel import ExactLaw, exact_kernel
from afc.realization import RealizationModel

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CLIQUE_MODEL = RealizationModel(p_on=0.85, alpha=0.15, k_min=1)


@pytest.fixture(scope="session")
def two_clique():
    return two_clique_fixture()


@pytest.fixture(scope="session")
def clique_law(two_clique):
    return ExactLaw(CLIQUE_MODEL, two_clique)


@pytest.fixture(scope="session")
def clique_exact(clique_law):
    return exact_kernel(CLIQUE_MODEL, clique_law.base, clique_law)


@pytest.fixture(scope="session")
def small_graph():
    """5 nodes, 7 edges: a 4-cycle with a chord and a pendant path."""
    return BaseTopology.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4), (2, 4)])


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid or rep.when != "call" and outcome != "error":
                continue
            num = int(nodeid.split("test_criterion_")[1].split("_")[0])
            detail = dict(rep.user_properties).get("detail", "")
            lines.append((num, f"criterion {num:2d}: {'PASS' if outcome == 'passed' else 'FAIL'}"
                               f"  ({rep.duration:.1f}s)  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
