import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hlsdse.cdfg import CdfgEdge, CdfgGraph, CdfgNode

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def random_graph(rng, n_nodes=12, feature_dim=6, edge_dim=3, n_edges=None, graph_id="g"):
    nodes = tuple(CdfgNode(i, tuple(rng.normal(size=feature_dim))) for i in range(n_nodes))
    n_edges = n_edges if n_edges is not None else 2 * n_nodes
    edges = []
    for _ in range(n_edges):
        u, v = rng.choice(n_nodes, 2, replace=False) if n_nodes > 1 else (0, 0)
        if u == v:
            continue
        edges.append(CdfgEdge(int(u), int(v), tuple(rng.normal(size=edge_dim))))
    return CdfgGraph(graph_id, nodes, tuple(edges))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# -- acceptance summary -------------------------------------------------------

_CRITERIA = {
    "01": "gradient correctness",
    "02": "MPNN reduction",
    "03": "permutation invariance",
    "04": "overfit sanity",
    "05": "Pareto/ADRS oracle equivalence",
    "06": "budget schedule",
    "07": "synthetic-space search quality",
    "08": "LLM loop safety and equivalence",
    "09": "algorithm-step fixtures",
    "10": "format stability",
}
_outcomes: dict[str, list[bool]] = {}


def _criterion(nodeid: str) -> str | None:
    if "test_acceptance.py::test_criterion_" not in nodeid:
        return None
    return nodeid.split("test_criterion_")[1][:2]


def pytest_runtest_logreport(report):
    crit = _criterion(report.nodeid)
    if crit is None:
        return
    if report.when == "call" or report.failed:
        _outcomes.setdefault(crit, []).append(report.passed and not report.failed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for crit, label in _CRITERIA.items():
        if crit not in _outcomes:
            continue
        status = "PASS" if all(_outcomes[crit]) else "FAIL"
        terminalreporter.write_line(f"criterion {int(crit):>2} {label}: {status}")
