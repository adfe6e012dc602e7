from __future__ import annotations

import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from parcelsort.gridworld import generate_map  # noqa: E402
from parcelsort.roadnet import orient  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def tiny_map():
    """5x5 map: one bin in the middle, one station on the bottom edge."""
    return generate_map(1, 1, 1)


@pytest.fixture(scope="session")
def tiny_net(tiny_map):
    return orient(tiny_map)


@pytest.fixture(scope="session")
def small_map():
    return generate_map(4, 9, 12)


@pytest.fixture(scope="session")
def small_net(small_map):
    return orient(small_map)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
