import numpy as np
import pytest

from effcap.channel import FadingState, NormalizedPowers, SystemParams, make_rng, sample_fading

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def params():
    return SystemParams.with_beta(2.0)


@pytest.fixture
def states():
    return sample_fading(make_rng(7, 0), 1.0, 1.0, 10_000)


def random_powers(rng, n):
    return NormalizedPowers(*(rng.exponential(1.0, n) for _ in range(4)))
