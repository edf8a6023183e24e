"""Domain types for the manufacturing world and the scenario loader.

A world is loaded once from a JSON scenario document, validated, and then
treated as immutable. All updates go through the small ``with_*`` helpers,
which return fresh copies, so snapshots can be shared freely.

Units are millimetres and degrees throughout; the scenario document must
declare them explicitly and the loader rejects anything else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Union

from .constraints import Constraint, ConstraintSet, decode_constraint, encode_constraint
from .errors import InvariantError, ScenarioParseError, ScenarioReferenceError
from .geometry import Box, Disc, Point, Region, point_in_region

__all__ = [
    "Box", "Disc", "Point", "Region", "point_in_region",
    "Quantity", "CapabilityValue", "CapabilityConfiguration",
    "RobotStatus", "Robot", "LocationKind", "Location", "SensorSpec",
    "TaskSpec", "Observation", "SystemKnowledge",
    "load_world", "load_world_file", "serialize_world",
    "decode_config", "encode_config", "decode_region", "encode_region",
    "transition_status",
]

REQUIRED_UNITS = {"length": "mm", "angle": "deg"}

_TOP_KEYS = ("units", "locations", "sensors", "robots", "tasks", "assignments")


@dataclass(frozen=True)
class Quantity:
    """A scalar capability value with an explicit unit, e.g. 100 mm/s."""

    value: float
    unit: str


# The closed set of capability value shapes. Keys are open-ended (any robot
# may carry extra capabilities), but 'reachability' must map to a Region,
# 'sensing' and 'tool' to identifier lists for the validator to see them.
CapabilityValue = Union[Quantity, Box, Disc, tuple[str, ...], str]


@dataclass(frozen=True)
class CapabilityConfiguration:
    """A robot's key/value capability description."""

    entries: dict[str, CapabilityValue]

    def get(self, key: str) -> CapabilityValue | None:
        return self.entries.get(key)

    def reachability(self) -> Region | None:
        """The 'reachability' region, or None if absent or wrongly typed."""
        value = self.entries.get("reachability")
        return value if isinstance(value, (Box, Disc)) else None

    def sensing(self) -> tuple[str, ...] | None:
        """The 'sensing' modality list, or None if absent or wrongly typed."""
        value = self.entries.get("sensing")
        return value if isinstance(value, tuple) else None

    def tools(self) -> tuple[str, ...] | None:
        """The 'tool' identifier list, or None if absent or wrongly typed."""
        value = self.entries.get("tool")
        return value if isinstance(value, tuple) else None

    def with_entry(self, key: str, value: CapabilityValue) -> "CapabilityConfiguration":
        entries = dict(self.entries)
        entries[key] = value
        return CapabilityConfiguration(entries)


class RobotStatus(str, Enum):
    IDLE = "idle"
    EXECUTING = "executing"
    FAILED = "failed"


@dataclass(frozen=True)
class Robot:
    id: str
    config: CapabilityConfiguration
    home_cell: str
    status: RobotStatus = RobotStatus.IDLE
    current_task: str | None = None


# Legal status transitions. FAILED is absorbing within a trial.
_LEGAL_TRANSITIONS = {
    RobotStatus.IDLE: {RobotStatus.EXECUTING, RobotStatus.FAILED},
    RobotStatus.EXECUTING: {RobotStatus.IDLE, RobotStatus.FAILED},
    RobotStatus.FAILED: set(),
}


def transition_status(
    robot: Robot,
    status: RobotStatus,
    *,
    current_task: str | None = None,
) -> Robot:
    """Return the robot with a new status, enforcing legal transitions."""
    if status not in _LEGAL_TRANSITIONS[robot.status]:
        raise InvariantError(
            f"robot {robot.id}: illegal status transition "
            f"{robot.status.value} -> {status.value}"
        )
    if (status is RobotStatus.EXECUTING) != (current_task is not None):
        raise InvariantError(
            f"robot {robot.id}: current_task must be set exactly while executing"
        )
    return replace(robot, status=status, current_task=current_task)


class LocationKind(str, Enum):
    BUFFER = "buffer"
    MACHINE = "machine"


@dataclass(frozen=True)
class Location:
    id: str
    kind: LocationKind
    position: Point
    cell: str


@dataclass(frozen=True)
class SensorSpec:
    id: str
    modality: str
    covered_locations: tuple[str, ...]


@dataclass(frozen=True)
class TaskSpec:
    id: str
    pickup: str
    dropoff: str
    required_modalities: tuple[str, ...] = ()
    required_tool: str | None = None
    constraints: ConstraintSet = ()
    duration: float = 1.0


@dataclass(frozen=True)
class Observation:
    """One synthetic perception result: an object seen by a sensor."""

    object_id: str
    location: str
    position: Point
    yaw_deg: float
    source_sensor: str


@dataclass(frozen=True)
class SystemKnowledge:
    """Everything the controller knows: robots, tasks, layout, assignments.

    Collections are keyed by id, which also encodes id uniqueness. The
    ``assignments`` map carries only live work: a completed task leaves the
    map, an unassigned task simply has no entry.
    """

    robots: dict[str, Robot] = field(default_factory=dict)
    tasks: dict[str, TaskSpec] = field(default_factory=dict)
    locations: dict[str, Location] = field(default_factory=dict)
    sensors: dict[str, SensorSpec] = field(default_factory=dict)
    assignments: dict[str, str] = field(default_factory=dict)

    def assigned_to(self, robot_id: str) -> tuple[str, ...]:
        """Task ids currently assigned to the robot, in task declaration order."""
        return tuple(
            task_id for task_id in self.tasks
            if self.assignments.get(task_id) == robot_id
        )

    def modalities(self) -> set[str]:
        return {sensor.modality for sensor in self.sensors.values()}

    def with_robot(self, robot: Robot) -> "SystemKnowledge":
        if robot.id not in self.robots:
            raise ScenarioReferenceError(f"unknown robot {robot.id!r}")
        robots = dict(self.robots)
        robots[robot.id] = robot
        return replace(self, robots=robots)

    def with_assignments(self, assignments: Mapping[str, str]) -> "SystemKnowledge":
        return replace(self, assignments=dict(assignments))

    def validate(self) -> None:
        """Re-check every structural invariant; raises on the first failure."""
        for key, location in self.locations.items():
            if key != location.id:
                raise InvariantError(f"location key {key!r} != id {location.id!r}")
        modalities = self.modalities()
        for key, sensor in self.sensors.items():
            if key != sensor.id:
                raise InvariantError(f"sensor key {key!r} != id {sensor.id!r}")
            for loc_id in sensor.covered_locations:
                if loc_id not in self.locations:
                    raise ScenarioReferenceError(
                        f"sensor {sensor.id}: unknown covered location {loc_id!r}"
                    )
        for key, robot in self.robots.items():
            if key != robot.id:
                raise InvariantError(f"robot key {key!r} != id {robot.id!r}")
            if robot.config.reachability() is None:
                raise InvariantError(
                    f"robot {robot.id}: config must include a 'reachability' region"
                )
            if (robot.status is RobotStatus.EXECUTING) != (robot.current_task is not None):
                raise InvariantError(
                    f"robot {robot.id}: current_task must be set exactly while executing"
                )
            if robot.current_task is not None and robot.current_task not in self.tasks:
                raise ScenarioReferenceError(
                    f"robot {robot.id}: unknown current task {robot.current_task!r}"
                )
        for key, task in self.tasks.items():
            if key != task.id:
                raise InvariantError(f"task key {key!r} != id {task.id!r}")
            for which, loc_id in (("pickup", task.pickup), ("dropoff", task.dropoff)):
                if loc_id not in self.locations:
                    raise ScenarioReferenceError(
                        f"task {task.id}: unknown {which} location {loc_id!r}"
                    )
            if task.pickup == task.dropoff:
                raise InvariantError(f"task {task.id}: pickup equals dropoff")
            if task.duration <= 0:
                raise InvariantError(f"task {task.id}: duration must be positive")
            missing = [m for m in task.required_modalities if m not in modalities]
            if missing:
                raise ScenarioReferenceError(
                    f"task {task.id}: no sensor provides modalities {missing}"
                )
        for task_id, robot_id in self.assignments.items():
            if task_id not in self.tasks:
                raise ScenarioReferenceError(f"assignment for unknown task {task_id!r}")
            if robot_id not in self.robots:
                raise ScenarioReferenceError(
                    f"task {task_id} assigned to unknown robot {robot_id!r}"
                )


def _as_number(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_point(value: object, where: str) -> Point:
    if not isinstance(value, list) or len(value) != 3:
        raise ScenarioParseError(f"{where}: expected [x, y, z]")
    x, y, z = (_as_number(v, where) for v in value)
    return (x, y, z)


def _as_pair(value: object, where: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise ScenarioParseError(f"{where}: expected a pair of numbers")
    a, b = (_as_number(v, where) for v in value)
    return (a, b)


def _require_keys(data: Mapping, required: set[str], optional: set[str], where: str) -> None:
    missing = required - set(data)
    if missing:
        raise ScenarioParseError(f"{where}: missing keys {sorted(missing)}")
    unknown = set(data) - required - optional
    if unknown:
        raise ScenarioParseError(f"{where}: unknown keys {sorted(unknown)}")


def _as_identifier(value: object, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise ScenarioParseError(f"{where}: expected a non-empty identifier string")
    return value


def decode_region(data: object, where: str) -> Region:
    if not isinstance(data, Mapping):
        raise ScenarioParseError(f"{where}: region must be an object")
    kind = data.get("kind")
    if kind == "box":
        _require_keys(data, {"kind", "min", "max"}, set(), where)
        return Box(_as_point(data["min"], where), _as_point(data["max"], where))
    if kind == "disc":
        _require_keys(data, {"kind", "center", "radius", "z"}, set(), where)
        return Disc(
            _as_pair(data["center"], where),
            _as_number(data["radius"], where),
            _as_pair(data["z"], where),
        )
    raise ScenarioParseError(f"{where}: unknown region kind {kind!r}")


def encode_region(region: Region) -> dict:
    if isinstance(region, Box):
        return {"kind": "box", "min": list(region.min_corner), "max": list(region.max_corner)}
    return {
        "kind": "disc",
        "center": list(region.center),
        "radius": region.radius,
        "z": list(region.z_range),
    }


def decode_capability_value(data: object, where: str) -> CapabilityValue:
    if isinstance(data, Mapping):
        if "kind" in data:
            return decode_region(data, where)
        if set(data) == {"value", "unit"}:
            return Quantity(_as_number(data["value"], where),
                            _as_identifier(data["unit"], where))
        raise ScenarioParseError(
            f"{where}: objects must be a region or a {{value, unit}} scalar"
        )
    if isinstance(data, list):
        if not all(isinstance(item, str) for item in data):
            raise ScenarioParseError(f"{where}: identifier lists must contain only strings")
        return tuple(data)
    if isinstance(data, str):
        return data
    raise ScenarioParseError(
        f"{where}: bare scalars are not allowed; use {{value, unit}}"
    )


def encode_capability_value(value: CapabilityValue) -> object:
    if isinstance(value, (Box, Disc)):
        return encode_region(value)
    if isinstance(value, Quantity):
        return {"value": value.value, "unit": value.unit}
    if isinstance(value, tuple):
        return list(value)
    return value


def decode_config(data: object, where: str) -> CapabilityConfiguration:
    """Decode a capability configuration; presence of keys is not enforced here.

    Whether 'reachability' must be present depends on the boundary: scenario
    robots and configuration refreshes require it, planner responses may omit
    it and fail validation instead.
    """
    if not isinstance(data, Mapping):
        raise ScenarioParseError(f"{where}: config must be an object")
    entries: dict[str, CapabilityValue] = {}
    for key, raw in data.items():
        name = _as_identifier(key, f"{where}: capability key")
        entries[name] = decode_capability_value(raw, f"{where}.{name}")
    return CapabilityConfiguration(entries)


def encode_config(config: CapabilityConfiguration) -> dict:
    return {key: encode_capability_value(value) for key, value in config.entries.items()}


def _decode_location(data: object, index: int) -> Location:
    where = f"locations[{index}]"
    if not isinstance(data, Mapping):
        raise ScenarioParseError(f"{where}: expected an object")
    _require_keys(data, {"id", "kind", "position", "cell"}, set(), where)
    kind_name = data["kind"]
    try:
        kind = LocationKind(kind_name)
    except ValueError:
        raise ScenarioParseError(f"{where}: unknown kind {kind_name!r}") from None
    return Location(
        id=_as_identifier(data["id"], where),
        kind=kind,
        position=_as_point(data["position"], where),
        cell=_as_identifier(data["cell"], where),
    )


def _decode_sensor(data: object, index: int) -> SensorSpec:
    where = f"sensors[{index}]"
    if not isinstance(data, Mapping):
        raise ScenarioParseError(f"{where}: expected an object")
    _require_keys(data, {"id", "modality", "covered_locations"}, set(), where)
    covered = data["covered_locations"]
    if not isinstance(covered, list) or not all(isinstance(c, str) for c in covered):
        raise ScenarioParseError(f"{where}: covered_locations must be a list of ids")
    return SensorSpec(
        id=_as_identifier(data["id"], where),
        modality=_as_identifier(data["modality"], where),
        covered_locations=tuple(covered),
    )


def _decode_robot(data: object, index: int) -> Robot:
    where = f"robots[{index}]"
    if not isinstance(data, Mapping):
        raise ScenarioParseError(f"{where}: expected an object")
    _require_keys(data, {"id", "home_cell", "config"}, set(), where)
    robot_id = _as_identifier(data["id"], where)
    config = decode_config(data["config"], f"{where}.config")
    if config.reachability() is None:
        raise InvariantError(
            f"robot {robot_id}: config must include a 'reachability' region"
        )
    return Robot(
        id=robot_id,
        config=config,
        home_cell=_as_identifier(data["home_cell"], where),
    )


def _decode_task(data: object, index: int) -> TaskSpec:
    where = f"tasks[{index}]"
    if not isinstance(data, Mapping):
        raise ScenarioParseError(f"{where}: expected an object")
    _require_keys(
        data,
        {"id", "pickup", "dropoff"},
        {"required_modalities", "required_tool", "duration", "constraints"},
        where,
    )
    modalities = data.get("required_modalities", [])
    if not isinstance(modalities, list) or not all(isinstance(m, str) for m in modalities):
        raise ScenarioParseError(f"{where}: required_modalities must be a list of strings")
    tool = data.get("required_tool")
    if tool is not None:
        tool = _as_identifier(tool, f"{where}.required_tool")
    raw_constraints = data.get("constraints", [])
    if not isinstance(raw_constraints, list):
        raise ScenarioParseError(f"{where}: constraints must be a list")
    constraints = tuple(
        decode_constraint(c, f"{where}.constraints[{i}]")
        for i, c in enumerate(raw_constraints)
    )
    return TaskSpec(
        id=_as_identifier(data["id"], where),
        pickup=_as_identifier(data["pickup"], where),
        dropoff=_as_identifier(data["dropoff"], where),
        required_modalities=tuple(modalities),
        required_tool=tool,
        constraints=constraints,
        duration=_as_number(data.get("duration", 1.0), f"{where}.duration"),
    )


def _index_by_id(items, what: str) -> dict:
    out: dict = {}
    for item in items:
        if item.id in out:
            raise InvariantError(f"duplicate {what} id {item.id!r}")
        out[item.id] = item
    return out


def load_world(text: str) -> SystemKnowledge:
    """Parse a scenario document into a validated SystemKnowledge.

    The document must carry exactly the top-level keys ``units``,
    ``locations``, ``sensors``, ``robots``, ``tasks`` and ``assignments``;
    unknown keys anywhere are rejected.

    Raises:
        ScenarioParseError: malformed JSON or wrong value shapes.
        ScenarioReferenceError: an id points at something undeclared.
        InvariantError: a structural invariant fails (duplicate ids,
            pickup equal to dropoff, inverted regions, ...).
    """
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise ScenarioParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioParseError("scenario must be a JSON object")
    _require_keys(data, set(_TOP_KEYS), set(), "scenario")
    if data["units"] != REQUIRED_UNITS:
        raise ScenarioParseError(
            f"units must be {REQUIRED_UNITS}, got {data['units']!r}"
        )
    for key in ("locations", "sensors", "robots", "tasks"):
        if not isinstance(data[key], list):
            raise ScenarioParseError(f"{key} must be a list")
    if not isinstance(data["assignments"], dict):
        raise ScenarioParseError("assignments must be an object mapping task id to robot id")

    locations = _index_by_id(
        (_decode_location(raw, i) for i, raw in enumerate(data["locations"])), "location")
    sensors = _index_by_id(
        (_decode_sensor(raw, i) for i, raw in enumerate(data["sensors"])), "sensor")
    robots = _index_by_id(
        (_decode_robot(raw, i) for i, raw in enumerate(data["robots"])), "robot")
    tasks = _index_by_id(
        (_decode_task(raw, i) for i, raw in enumerate(data["tasks"])), "task")
    assignments = {}
    for task_id, robot_id in data["assignments"].items():
        assignments[_as_identifier(task_id, "assignments")] = _as_identifier(
            robot_id, f"assignments[{task_id}]")

    world = SystemKnowledge(
        robots=robots,
        tasks=tasks,
        locations=locations,
        sensors=sensors,
        assignments=assignments,
    )
    world.validate()
    return world


def load_world_file(path) -> SystemKnowledge:
    with open(path, "r", encoding="utf-8") as handle:
        return load_world(handle.read())


def _encode_task(task: TaskSpec) -> dict:
    doc: dict = {"id": task.id, "pickup": task.pickup, "dropoff": task.dropoff}
    if task.required_modalities:
        doc["required_modalities"] = list(task.required_modalities)
    if task.required_tool is not None:
        doc["required_tool"] = task.required_tool
    if task.duration != 1.0:
        doc["duration"] = task.duration
    if task.constraints:
        doc["constraints"] = [encode_constraint(c) for c in task.constraints]
    return doc


def serialize_world(world: SystemKnowledge) -> str:
    """Render the world back into scenario JSON (runtime status is not part
    of the document format, so only freshly loaded worlds round-trip exactly)."""
    doc = {
        "units": dict(REQUIRED_UNITS),
        "locations": [
            {
                "id": loc.id,
                "kind": loc.kind.value,
                "position": list(loc.position),
                "cell": loc.cell,
            }
            for loc in world.locations.values()
        ],
        "sensors": [
            {
                "id": sensor.id,
                "modality": sensor.modality,
                "covered_locations": list(sensor.covered_locations),
            }
            for sensor in world.sensors.values()
        ],
        "robots": [
            {
                "id": robot.id,
                "home_cell": robot.home_cell,
                "config": encode_config(robot.config),
            }
            for robot in world.robots.values()
        ],
        "tasks": [_encode_task(task) for task in world.tasks.values()],
        "assignments": dict(world.assignments),
    }
    return json.dumps(doc, indent=2)
