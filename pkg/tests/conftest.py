from __future__ import annotations

import pytest

from scenemem.env_sim import simulate
from scenemem.harness import build_dataset
from scenemem.qa_gen import generate_with_anchors

SMALL_SEEDS = (1, 2, 3)


@pytest.fixture(scope="session")
def grid_traj():
    return simulate("gridworld", 1)


@pytest.fixture(scope="session")
def text_traj():
    return simulate("textadv", 1)


@pytest.fixture(scope="session", params=["gridworld", "textadv"])
def small_dataset(request):
    return build_dataset(request.param, seeds=SMALL_SEEDS)


@pytest.fixture(scope="session")
def templated(small_dataset):
    """(trajectory, QAItem, template AnchorTuple) triples for the small dataset."""
    out = []
    for t in small_dataset.trajectories:
        for item, anchors in generate_with_anchors(t, 3, 0):
            out.append((t, item, anchors))
    return out


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
