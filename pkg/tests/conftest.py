import numpy as np
import pytest


def brute_force_knn(x, m, k):
    """Plain-Python k nearest windows: [(distance, start)] sorted, later start wins ties."""
    x = [float(v) for v in x]
    n = len(x)
    query = x[n - m:]
    cands = []
    for j in range(n - m):
        d = sum((x[j + i] - query[i]) ** 2 for i in range(m))
        cands.append((d, -j))
    cands.sort()
    return [(d, -nj) for d, nj in cands[:k]]


def brute_force_nnr(x, m=3, k=3, q=-2, eps=1e-12):
    nb = brute_force_knn(x, m, k)
    labels = [float(x[j + m]) for _, j in nb]
    dists = [d for d, _ in nb]
    exact = [v for d, v in zip(dists, labels) if d <= eps]
    if exact:
        return sum(exact) / len(exact)
    w = [d ** q for d in dists]
    return sum(wi * v for wi, v in zip(w, labels)) / sum(w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
