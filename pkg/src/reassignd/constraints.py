"""Boolean task constraints and their evaluation against robot configurations.

Each constraint is a predicate over a capability configuration. A task is
valid for a configuration iff every constraint attached to the task holds.
All failures are reported as verdicts with stable machine codes; a missing
capability key is an ordinary (correctable) validation failure, never a
crash, because planners are allowed to emit incomplete configurations.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Mapping, Sequence

from .errors import InvariantError, ScenarioParseError
from .geometry import point_in_region

if TYPE_CHECKING:
    from .world import CapabilityConfiguration, SystemKnowledge, TaskSpec

# Stable machine codes, used verbatim in validation feedback.
REACH_VIOLATION = "REACH_VIOLATION"
SENSOR_GAP = "SENSOR_GAP"
TOOL_MISMATCH = "TOOL_MISMATCH"
MISSING_CAPABILITY = "MISSING_CAPABILITY"

_ENDPOINTS = ("pickup", "dropoff")


class ConstraintKind(str, Enum):
    REACHABILITY = "reachability"
    SENSOR_COVERAGE = "sensor_coverage"
    TOOL = "tool"


@dataclass(frozen=True)
class Constraint:
    """One requirement a task places on the executing robot's configuration.

    Parameters are kind-specific:

    * ``REACHABILITY`` checks the listed task ``endpoints`` (default both)
      against the configuration's ``reachability`` region.
    * ``SENSOR_COVERAGE`` checks the listed ``modalities``; ``None`` means
      the task's own ``required_modalities``.
    * ``TOOL`` checks ``tool``; ``None`` means the task's ``required_tool``.
    """

    kind: ConstraintKind
    endpoints: tuple[str, ...] = _ENDPOINTS
    modalities: tuple[str, ...] | None = None
    tool: str | None = None

    def __post_init__(self) -> None:
        if self.kind is ConstraintKind.REACHABILITY:
            if self.modalities is not None or self.tool is not None:
                raise InvariantError("reachability constraint takes only endpoints")
            if not self.endpoints:
                raise InvariantError("reachability constraint needs at least one endpoint")
            bad = [e for e in self.endpoints if e not in _ENDPOINTS]
            if bad:
                raise InvariantError(f"unknown endpoints {bad}; expected pickup/dropoff")
        elif self.kind is ConstraintKind.SENSOR_COVERAGE:
            if self.tool is not None or self.endpoints != _ENDPOINTS:
                raise InvariantError("sensor_coverage constraint takes only modalities")
        elif self.kind is ConstraintKind.TOOL:
            if self.modalities is not None or self.endpoints != _ENDPOINTS:
                raise InvariantError("tool constraint takes only a tool id")


# A task's constraints, in evaluation order. May be empty (vacuously valid).
ConstraintSet = tuple[Constraint, ...]


@dataclass(frozen=True)
class Violation:
    constraint_index: int
    code: str
    reason: str


@dataclass(frozen=True)
class Verdict:
    valid: bool
    violations: tuple[Violation, ...] = ()

    def __post_init__(self) -> None:
        if self.valid != (not self.violations):
            raise ValueError("verdict must be valid exactly when violations are empty")

    @classmethod
    def ok(cls) -> "Verdict":
        return cls(valid=True)

    @classmethod
    def rejected(cls, violations: Sequence[Violation]) -> "Verdict":
        return cls(valid=False, violations=tuple(violations))


def _check_reachability(
    constraint: Constraint,
    index: int,
    task: "TaskSpec",
    config: "CapabilityConfiguration",
    world: "SystemKnowledge",
    dropoff_only: bool,
) -> Violation | None:
    region = config.reachability()
    if region is None:
        return Violation(index, MISSING_CAPABILITY,
                         "configuration has no usable 'reachability' region")
    endpoints = ("dropoff",) if dropoff_only else constraint.endpoints
    misses = []
    for name in endpoints:
        loc_id = task.pickup if name == "pickup" else task.dropoff
        location = world.locations[loc_id]
        if not point_in_region(location.position, region):
            misses.append(f"{name} {loc_id} at {location.position}")
    if misses:
        return Violation(index, REACH_VIOLATION,
                         "outside reachability region: " + "; ".join(misses))
    return None


def _check_sensor_coverage(
    constraint: Constraint,
    index: int,
    task: "TaskSpec",
    config: "CapabilityConfiguration",
    world: "SystemKnowledge",
) -> Violation | None:
    required = constraint.modalities if constraint.modalities is not None else task.required_modalities
    if not required:
        return None
    sensing = config.sensing()
    if sensing is None:
        return Violation(index, MISSING_CAPABILITY,
                         "configuration has no 'sensing' modality list")
    gaps = []
    for modality in required:
        if modality not in sensing:
            gaps.append(f"modality '{modality}' not in the robot's sensing list")
            continue
        covered = any(
            sensor.modality == modality
            and task.pickup in sensor.covered_locations
            and task.dropoff in sensor.covered_locations
            for sensor in world.sensors.values()
        )
        if not covered:
            gaps.append(
                f"no '{modality}' sensor covers both {task.pickup} and {task.dropoff}"
            )
    if gaps:
        return Violation(index, SENSOR_GAP, "; ".join(gaps))
    return None


def _check_tool(
    constraint: Constraint,
    index: int,
    task: "TaskSpec",
    config: "CapabilityConfiguration",
) -> Violation | None:
    required = constraint.tool if constraint.tool is not None else task.required_tool
    if required is None:
        return None
    tools = config.tools()
    if tools is None:
        return Violation(index, MISSING_CAPABILITY,
                         "configuration has no 'tool' list")
    if required not in tools:
        return Violation(index, TOOL_MISMATCH,
                         f"tool '{required}' not in {list(tools)}")
    return None


def _check(
    constraint: Constraint,
    index: int,
    task: "TaskSpec",
    config: "CapabilityConfiguration",
    world: "SystemKnowledge",
    dropoff_only: bool,
) -> Violation | None:
    if constraint.kind is ConstraintKind.REACHABILITY:
        return _check_reachability(constraint, index, task, config, world, dropoff_only)
    if constraint.kind is ConstraintKind.SENSOR_COVERAGE:
        return _check_sensor_coverage(constraint, index, task, config, world)
    return _check_tool(constraint, index, task, config)


def evaluate(
    constraint: Constraint,
    task: "TaskSpec",
    config: "CapabilityConfiguration",
    world: "SystemKnowledge",
    *,
    dropoff_only: bool = False,
) -> bool:
    """Evaluate one constraint; a missing capability counts as invalid.

    ``dropoff_only`` narrows reachability checks to the dropoff endpoint,
    regardless of the constraint's own endpoint list.
    """
    return _check(constraint, 0, task, config, world, dropoff_only) is None


def validate_assignment(
    task: "TaskSpec",
    config: "CapabilityConfiguration",
    world: "SystemKnowledge",
    *,
    dropoff_only: bool = False,
) -> Verdict:
    """Judge whether the configuration satisfies every constraint of the task.

    The verdict lists one violation per failing constraint, in constraint
    order. A task with no constraints is vacuously valid.
    """
    violations = []
    for index, constraint in enumerate(task.constraints):
        violation = _check(constraint, index, task, config, world, dropoff_only)
        if violation is not None:
            violations.append(violation)
    if violations:
        return Verdict.rejected(violations)
    return Verdict.ok()


@dataclass(frozen=True)
class FeasiblePartition:
    feasible: tuple[str, ...]
    infeasible: dict[str, Verdict]


def partition_feasible(
    tasks: Sequence["TaskSpec"],
    config: "CapabilityConfiguration",
    world: "SystemKnowledge",
    *,
    dropoff_only: bool = False,
) -> FeasiblePartition:
    """Split tasks into those the configuration can take over and those it cannot.

    The partition is exhaustive and disjoint; both sides preserve input order
    and the infeasible side keeps each task's full verdict.
    """
    feasible: list[str] = []
    infeasible: dict[str, Verdict] = {}
    for task in tasks:
        verdict = validate_assignment(task, config, world, dropoff_only=dropoff_only)
        if verdict.valid:
            feasible.append(task.id)
        else:
            infeasible[task.id] = verdict
    return FeasiblePartition(tuple(feasible), infeasible)


def decode_constraint(data: object, where: str) -> Constraint:
    """Decode one constraint object from scenario JSON; unknown keys rejected."""
    if not isinstance(data, Mapping):
        raise ScenarioParseError(f"{where}: constraint must be an object")
    kind_name = data.get("kind")
    try:
        kind = ConstraintKind(kind_name)
    except ValueError:
        raise ScenarioParseError(f"{where}: unknown constraint kind {kind_name!r}") from None
    allowed = {
        ConstraintKind.REACHABILITY: {"kind", "endpoints"},
        ConstraintKind.SENSOR_COVERAGE: {"kind", "modalities"},
        ConstraintKind.TOOL: {"kind", "tool"},
    }[kind]
    unknown = set(data) - allowed
    if unknown:
        raise ScenarioParseError(f"{where}: unknown constraint keys {sorted(unknown)}")
    if kind is ConstraintKind.REACHABILITY:
        endpoints = data.get("endpoints", list(_ENDPOINTS))
        if (not isinstance(endpoints, list) or not endpoints
                or len(set(endpoints)) != len(endpoints)):
            raise ScenarioParseError(f"{where}: endpoints must be a non-empty list without duplicates")
        return Constraint(kind, endpoints=tuple(endpoints))
    if kind is ConstraintKind.SENSOR_COVERAGE:
        modalities = data.get("modalities")
        if modalities is None:
            return Constraint(kind)
        if not isinstance(modalities, list) or not all(isinstance(m, str) for m in modalities):
            raise ScenarioParseError(f"{where}: modalities must be a list of strings")
        return Constraint(kind, modalities=tuple(modalities))
    tool = data.get("tool")
    if tool is not None and not isinstance(tool, str):
        raise ScenarioParseError(f"{where}: tool must be a string")
    return Constraint(kind, tool=tool)


def encode_constraint(constraint: Constraint) -> dict:
    """Inverse of :func:`decode_constraint`; defaults are omitted."""
    doc: dict = {"kind": constraint.kind.value}
    if constraint.kind is ConstraintKind.REACHABILITY and constraint.endpoints != _ENDPOINTS:
        doc["endpoints"] = list(constraint.endpoints)
    if constraint.kind is ConstraintKind.SENSOR_COVERAGE and constraint.modalities is not None:
        doc["modalities"] = list(constraint.modalities)
    if constraint.kind is ConstraintKind.TOOL and constraint.tool is not None:
        doc["tool"] = constraint.tool
    return doc
