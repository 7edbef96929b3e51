import numpy as np
import pytest

from energynet import make_geometric_integers, make_path, make_random_network, truncate, whole


def brute_energy(trunc, u, v):
    """Half the double sum over ordered pairs, straight from the network table."""
    idx = trunc.index
    total = 0.0
    for x in trunc.interior:
        for y, w in trunc.base.neighbors(x):
            if y in idx:
                total += 0.5 * w * (u[idx[x]] - u[idx[y]]) * (v[idx[x]] - v[idx[y]])
            elif trunc.wired:
                # edge to the grounded boundary, seen once from the interior side
                total += w * u[idx[x]] * v[idx[x]]
    return total


def dense_laplacian(trunc):
    """Laplacian built from the network table with numpy only."""
    n = trunc.n
    L = np.zeros((n, n))
    for x in trunc.interior:
        i = trunc.index[x]
        for y, w in trunc.base.neighbors(x):
            j = trunc.index.get(y)
            if j is not None:
                L[i, i] += w
                L[i, j] -= w
            elif trunc.wired:
                L[i, i] += w
    return L


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def path3():
    return whole(make_path(3))


@pytest.fixture
def zgeom_free():
    return truncate(make_geometric_integers(2, 10), 0, 8, "free")


@pytest.fixture
def zgeom_wired():
    return truncate(make_geometric_integers(2, 10), 0, 8, "wired")


@pytest.fixture
def random20():
    return whole(make_random_network(20, np.random.default_rng(42)))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
