import numpy as np
import pytest

from sepgl.groups import GroupStructure


@pytest.fixture
def three_d():
    """G1 = {0, 1}, G2 = {0, 1, 2}, unit weights."""
    return GroupStructure(3, [[0, 1], [0, 1, 2]], [1.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def membership_sets(gs):
    """Brute-force oracle: the set of groups containing each variable."""
    return [frozenset(g for g, G in enumerate(gs.groups) if j in set(G.tolist())) for j in range(gs.p)]


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_KEY

    results = config.stash.get(ACCEPTANCE_KEY, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
