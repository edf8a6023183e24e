"""Seeded random worlds and fault scripts for stress testing and batch runs.

Two flavours:

* :func:`random_validation_world` produces arbitrary small worlds for
  hammering the constraint engine; configurations may lack capability keys
  and assignments need not be valid.
* :func:`random_sim_world` produces worlds that are safe to simulate: a
  camera covers every location, every initial assignment is valid for its
  robot, and every task can therefore actually execute once (re)assigned.
"""

from __future__ import annotations

import random

from .constraints import Constraint, ConstraintKind, validate_assignment
from .geometry import Box, Disc
from .sim import AfterTasksCompleted, AtTime, FaultScript, FaultTrigger
from .world import (
    CapabilityConfiguration,
    CapabilityValue,
    Location,
    LocationKind,
    Quantity,
    Robot,
    SensorSpec,
    SystemKnowledge,
    TaskSpec,
)

_MODALITY_POOL = ("camera", "depth", "rfid")
_TOOL_POOL = ("gripper", "suction", "welder")


def _random_region(rng: random.Random) -> Box | Disc:
    if rng.random() < 0.7:
        xs = sorted(rng.uniform(-200, 2200) for _ in range(2))
        ys = sorted(rng.uniform(-200, 2200) for _ in range(2))
        return Box((xs[0], ys[0], -100.0), (xs[1], ys[1], 600.0))
    return Disc(
        center=(rng.uniform(0, 2000), rng.uniform(0, 2000)),
        radius=rng.uniform(200, 1500),
        z_range=(-100.0, 600.0),
    )


def _random_locations(rng: random.Random, count: int) -> dict[str, Location]:
    locations = {}
    for index in range(count):
        loc_id = f"L{index + 1}"
        locations[loc_id] = Location(
            id=loc_id,
            kind=rng.choice(list(LocationKind)),
            position=(rng.uniform(0, 2000), rng.uniform(0, 2000), 0.0),
            cell=rng.choice(("cell-1", "cell-2")),
        )
    return locations


def random_validation_world(
    rng: random.Random,
    *,
    max_robots: int = 4,
    max_tasks: int = 6,
    max_locations: int = 8,
    max_constraints: int = 3,
) -> tuple[SystemKnowledge, str]:
    """An arbitrary small world plus a suggested robot to disrupt.

    Constraints, configurations and assignments are drawn freely, so
    validation may fail in every possible way (including missing capability
    keys); only the world's structural invariants are guaranteed.
    """
    locations = _random_locations(rng, rng.randint(2, max_locations))
    location_ids = list(locations)

    modalities = rng.sample(_MODALITY_POOL, rng.randint(1, len(_MODALITY_POOL)))
    sensors = {}
    for index in range(rng.randint(1, 3)):
        sensor_id = f"S{index + 1}"
        covered = rng.sample(location_ids, rng.randint(1, len(location_ids)))
        sensors[sensor_id] = SensorSpec(sensor_id, rng.choice(modalities), tuple(covered))
    present_modalities = sorted({s.modality for s in sensors.values()})

    robots = {}
    for index in range(rng.randint(2, max_robots)):
        robot_id = f"R{index + 1}"
        entries: dict[str, CapabilityValue] = {"reachability": _random_region(rng)}
        if rng.random() < 0.85:
            entries["sensing"] = tuple(
                rng.sample(present_modalities, rng.randint(0, len(present_modalities)))
            )
        if rng.random() < 0.8:
            entries["tool"] = tuple(rng.sample(_TOOL_POOL, rng.randint(0, len(_TOOL_POOL))))
        if rng.random() < 0.5:
            entries["speed"] = Quantity(rng.uniform(50, 250), "mm/s")
        robots[robot_id] = Robot(robot_id, CapabilityConfiguration(entries), "cell-1")

    tasks = {}
    assignments = {}
    for index in range(rng.randint(0, max_tasks)):
        task_id = f"T{index + 1}"
        pickup, dropoff = rng.sample(location_ids, 2)
        constraints = []
        for _ in range(rng.randint(0, max_constraints)):
            kind = rng.choice(list(ConstraintKind))
            if kind is ConstraintKind.REACHABILITY:
                endpoints = rng.choice(
                    [("pickup", "dropoff"), ("dropoff",), ("pickup",)]
                )
                constraints.append(Constraint(kind, endpoints=endpoints))
            elif kind is ConstraintKind.SENSOR_COVERAGE:
                override = (
                    tuple(rng.sample(present_modalities, rng.randint(1, len(present_modalities))))
                    if rng.random() < 0.4
                    else None
                )
                constraints.append(Constraint(kind, modalities=override))
            else:
                override_tool = rng.choice(_TOOL_POOL) if rng.random() < 0.4 else None
                constraints.append(Constraint(kind, tool=override_tool))
        tasks[task_id] = TaskSpec(
            id=task_id,
            pickup=pickup,
            dropoff=dropoff,
            required_modalities=tuple(
                rng.sample(present_modalities, rng.randint(0, min(2, len(present_modalities))))
            ),
            required_tool=rng.choice(_TOOL_POOL) if rng.random() < 0.5 else None,
            constraints=tuple(constraints),
        )
        if rng.random() < 0.8:
            assignments[task_id] = rng.choice(list(robots))

    world = SystemKnowledge(
        robots=robots,
        tasks=tasks,
        locations=locations,
        sensors=sensors,
        assignments=assignments,
    )
    world.validate()
    return world, rng.choice(list(robots))


def random_sim_world(rng: random.Random, *, max_robots: int = 4, max_tasks: int = 6) -> SystemKnowledge:
    """A small world whose initial assignments are all valid and executable.

    One camera covers every location and every robot senses it, so a task
    that passes validation can always be observed and therefore completed.
    Robot regions cover different location subsets, which is what makes some
    orphaned tasks infeasible for the survivors.
    """
    locations = _random_locations(rng, rng.randint(4, 8))
    location_ids = list(locations)

    sensors = {
        "CAM": SensorSpec("CAM", "camera", tuple(location_ids)),
        "AUX": SensorSpec(
            "AUX", "depth", tuple(rng.sample(location_ids, rng.randint(1, len(location_ids))))
        ),
    }

    robots = {}
    reach_sets: dict[str, list[str]] = {}
    for index in range(rng.randint(2, max_robots)):
        robot_id = f"R{index + 1}"
        reachable = rng.sample(location_ids, rng.randint(2, len(location_ids)))
        xs = [locations[l].position[0] for l in reachable]
        ys = [locations[l].position[1] for l in reachable]
        region = Box(
            (min(xs) - 50.0, min(ys) - 50.0, -100.0),
            (max(xs) + 50.0, max(ys) + 50.0, 600.0),
        )
        entries: dict[str, CapabilityValue] = {
            "reachability": region,
            "sensing": ("camera",),
            "tool": tuple(rng.sample(_TOOL_POOL, rng.randint(1, len(_TOOL_POOL)))),
        }
        robots[robot_id] = Robot(robot_id, CapabilityConfiguration(entries), "cell-1")
        reach_sets[robot_id] = reachable

    world = SystemKnowledge(robots=robots, locations=locations, sensors=sensors)

    tasks = {}
    assignments = {}
    for index in range(rng.randint(1, max_tasks)):
        task_id = f"T{index + 1}"
        owner = rng.choice(list(robots))
        pickup, dropoff = rng.sample(reach_sets[owner], 2)
        tools = robots[owner].config.tools() or ()
        required_tool = rng.choice(tools) if tools and rng.random() < 0.6 else None
        constraints = [
            Constraint(ConstraintKind.REACHABILITY),
            Constraint(ConstraintKind.SENSOR_COVERAGE),
        ]
        if required_tool is not None:
            constraints.append(Constraint(ConstraintKind.TOOL))
        task = TaskSpec(
            id=task_id,
            pickup=pickup,
            dropoff=dropoff,
            required_modalities=("camera",),
            required_tool=required_tool,
            constraints=tuple(constraints),
            duration=float(rng.randint(1, 3)),
        )
        tasks[task_id] = task
        assignments[task_id] = owner

    world = SystemKnowledge(
        robots=robots,
        tasks=tasks,
        locations=locations,
        sensors=sensors,
        assignments=assignments,
    )
    world.validate()
    for task_id, owner in assignments.items():
        verdict = validate_assignment(tasks[task_id], robots[owner].config, world)
        assert verdict.valid, f"generator bug: initial assignment {task_id}->{owner} invalid"
    return world


def random_fault_script(rng: random.Random, world: SystemKnowledge) -> FaultScript:
    """Fail a random subset of robots, each by a random trigger."""
    robot_ids = list(world.robots)
    count = rng.randint(0, len(robot_ids))
    entries: dict[str, FaultTrigger] = {}
    for robot_id in rng.sample(robot_ids, count):
        if rng.random() < 0.6:
            entries[robot_id] = AfterTasksCompleted(rng.randint(1, 3))
        else:
            entries[robot_id] = AtTime(round(rng.uniform(0.5, 6.0), 2))
    return FaultScript(entries)
