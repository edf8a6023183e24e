import socket
from pathlib import Path

import pytest

from reassignd import RobotStatus, gather_context, load_world, transition_status

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
DUAL_CELL = SCENARIO_DIR / "dual_cell.json"


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """The whole suite must pass with networking disabled; any attempt to
    open a socket connection is a test failure."""

    def deny(self, *args, **kwargs):
        raise AssertionError("network access is disabled in the test suite")

    monkeypatch.setattr(socket.socket, "connect", deny)


@pytest.fixture(scope="session")
def golden_text():
    return DUAL_CELL.read_text(encoding="utf-8")


@pytest.fixture()
def golden_world(golden_text):
    return load_world(golden_text)


@pytest.fixture()
def disrupted_world(golden_world):
    """The dual-cell world at the moment of disruption: R2 has completed its
    two sorting tasks and then failed, orphaning its four remaining tasks."""
    world = golden_world.with_assignments(
        {
            task_id: robot_id
            for task_id, robot_id in golden_world.assignments.items()
            if task_id not in ("cell2-sort-1", "cell2-sort-2")
        }
    )
    return world.with_robot(transition_status(world.robots["R2"], RobotStatus.FAILED))


@pytest.fixture()
def golden_ctx(disrupted_world):
    return gather_context(disrupted_world, "R2")
