import itertools
import sys

import numpy as np
import pytest

from ldprank.ranking import Profile, Ranking


def brute_kendall(a, b):
    """Discordant pairs by explicit position lookup on both lists."""
    a, b = list(a), list(b)
    count = 0
    for x, y in itertools.combinations(range(len(a)), 2):
        if (a.index(x) < a.index(y)) != (b.index(x) < b.index(y)):
            count += 1
    return count


def random_profile(rng, n, m):
    return Profile([Ranking(rng.permutation(m)) for _ in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, text = results[number]
        terminalreporter.write_line(f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'} {text}")
