import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from influence_game import netgen
from influence_game.dynamics import InfluenceAllocation
from influence_game.solvers import random_allocation

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_trust(M: int, rng: np.random.Generator, density: float = 0.6) -> netgen.SocialNetwork:
    """Connected random network with self-loops, built without the generators."""
    while True:
        adj = rng.random((M, M)) < density
        adj |= adj.T
        adj |= np.eye(M, dtype=bool)
        W = rng.random((M, M)) * adj
        W /= W.sum(axis=1, keepdims=True)
        net = netgen.network_from_trust(W)
        if net.is_connected():
            return net


def random_allocations(M: int, P: int, budget: float, rng) -> list[InfluenceAllocation]:
    return [random_allocation(M, budget, int(rng.integers(2**31))) for _ in range(P)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
