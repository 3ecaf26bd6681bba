import numpy as np
import pytest

from anchorroute.topology import CrescentObstacle, deploy, network_from_edges


def floyd_warshall_loops(n, edges):
    """Plain triple-loop all-pairs shortest paths."""
    inf = float("inf")
    d = [[0.0 if i == j else inf for j in range(n)] for i in range(n)]
    for u, v in edges:
        d[u][v] = d[v][u] = 1.0
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik == inf:
                continue
            di = d[i]
            for j in range(n):
                if dik + dk[j] < di[j]:
                    di[j] = dik + dk[j]
    return np.array(d)


@pytest.fixture
def path3():
    # a - b - c laid out on the x axis
    return network_from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture(scope="session")
def small_crescent_net():
    ob = CrescentObstacle((6.0, 6.0), 3.0, (4.5, 6.0), 2.5)
    return deploy(11, 150, (12.0, 12.0), 1.6, ob)


@pytest.fixture(scope="session")
def net60():
    return deploy(5, 60, (8.0, 8.0), 2.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
