"""Discrete-event simulation of the robot fleet, plus fault injection.

Agents run on a logical clock: starting a task requires an observation of
the task's part (synthesised by the sensor module), execution is a timed
wait, and completion frees the agent for its next queued task. Injected
faults flip an agent into the absorbing failed state and route a failure
notification into the controller's adaptation loop.

Logical time, not wall time, keeps every trial deterministic: each planner
call costs a fixed latency, so an adaptation that needs three attempts takes
three time units.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .controller import (
    AdaptationConfig,
    AdaptationOutcome,
    AdaptationStatus,
    LogicalClock,
    handle_failure,
)
from .constraints import Verdict
from .errors import EventLimitExceeded
from .planner import DisruptionContext, OraclePlanner, Planner
from .world import (
    Observation,
    RobotStatus,
    SystemKnowledge,
    transition_status,
)

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    TASK_ASSIGNED = "task_assigned"
    TASK_STARTED = "task_started"
    TASK_COMPLETED = "task_completed"
    FAILURE_NOTIFICATION = "failure_notification"
    CONFIG_REFRESHED = "config_refreshed"


@dataclass(frozen=True)
class AgentEvent:
    kind: EventKind
    robot_id: str
    task_id: str | None
    timestamp: float


@dataclass(frozen=True)
class AfterTasksCompleted:
    """Fail the robot right after its n-th task completion."""

    count: int


@dataclass(frozen=True)
class AtTime:
    """Fail the robot at a fixed logical time."""

    time: float


FaultTrigger = Union[AfterTasksCompleted, AtTime]


@dataclass(frozen=True)
class FaultScript:
    """At most one scripted fault per robot per trial."""

    entries: dict[str, FaultTrigger] = field(default_factory=dict)


@dataclass
class AgentState:
    """Mutable per-robot runtime state used by the agent state machine."""

    robot_id: str
    status: RobotStatus = RobotStatus.IDLE
    queue: list[str] = field(default_factory=list)
    executing: str | None = None
    busy_until: float | None = None
    completed_count: int = 0
    fault: FaultTrigger | None = None


def scene_objects(world: SystemKnowledge) -> dict[str, str]:
    """The synthetic part inventory: one part per distinct pickup location,
    in task declaration order. Part ids are derived from the location id."""
    objects: dict[str, str] = {}
    for task in world.tasks.values():
        objects.setdefault(f"part-{task.pickup}", task.pickup)
    return objects


def observe(robot_id: str, world: SystemKnowledge) -> list[Observation]:
    """Synthetic perception for one robot: every part sitting at a location
    covered by some sensor whose modality the robot's config lists under
    'sensing'. Poses are the declared location positions."""
    robot = world.robots[robot_id]
    sensing = robot.config.sensing() or ()
    observations: list[Observation] = []
    for object_id, location_id in scene_objects(world).items():
        source = next(
            (
                sensor
                for sensor in world.sensors.values()
                if sensor.modality in sensing and location_id in sensor.covered_locations
            ),
            None,
        )
        if source is not None:
            observations.append(
                Observation(
                    object_id=object_id,
                    location=location_id,
                    position=world.locations[location_id].position,
                    yaw_deg=0.0,
                    source_sensor=source.id,
                )
            )
    return observations


def _can_observe_task(robot_id: str, world: SystemKnowledge, task_id: str) -> bool:
    part = f"part-{world.tasks[task_id].pickup}"
    return any(obs.object_id == part for obs in observe(robot_id, world))


def _fail(state: AgentState, now: float, emitted: list[AgentEvent]) -> None:
    state.status = RobotStatus.FAILED
    state.queue.clear()
    state.executing = None
    state.busy_until = None
    emitted.append(AgentEvent(EventKind.FAILURE_NOTIFICATION, state.robot_id, None, now))


def step(
    state: AgentState,
    world: SystemKnowledge,
    inbound: tuple[AgentEvent, ...] = (),
    *,
    now: float,
) -> list[AgentEvent]:
    """Advance one agent's state machine; returns the events it emits.

    Transitions: idle plus a task assignment starts execution (provided the
    task's part is observable, otherwise the agent waits); an elapsed
    execution completes and the agent picks up its next queued task; a due
    fault trigger moves the agent to the absorbing failed state. When a
    fault and a completion are due at the same instant, the fault wins and
    the in-flight task stays assigned (it becomes orphaned work).

    Illegal events are ignored with a logged warning, never an exception.
    """
    emitted: list[AgentEvent] = []

    if (
        state.status is not RobotStatus.FAILED
        and isinstance(state.fault, AtTime)
        and now >= state.fault.time
    ):
        _fail(state, now, emitted)

    for event in inbound:
        if event.kind is not EventKind.TASK_ASSIGNED:
            logger.warning(
                "agent %s ignoring unexpected inbound event %s", state.robot_id, event.kind.value
            )
            continue
        if state.status is RobotStatus.FAILED:
            logger.warning(
                "agent %s is failed; ignoring assignment of task %s",
                state.robot_id,
                event.task_id,
            )
            continue
        if event.task_id is not None:
            state.queue.append(event.task_id)

    if (
        state.status is RobotStatus.EXECUTING
        and state.busy_until is not None
        and now >= state.busy_until
    ):
        finished = state.executing
        state.status = RobotStatus.IDLE
        state.executing = None
        state.busy_until = None
        state.completed_count += 1
        emitted.append(AgentEvent(EventKind.TASK_COMPLETED, state.robot_id, finished, now))
        if (
            isinstance(state.fault, AfterTasksCompleted)
            and state.completed_count >= state.fault.count
        ):
            _fail(state, now, emitted)

    if state.status is RobotStatus.IDLE and state.queue:
        task_id = state.queue[0]
        if _can_observe_task(state.robot_id, world, task_id):
            state.queue.pop(0)
            state.status = RobotStatus.EXECUTING
            state.executing = task_id
            state.busy_until = now + world.tasks[task_id].duration
            emitted.append(AgentEvent(EventKind.TASK_STARTED, state.robot_id, task_id, now))
        # else: the part is not observable yet; keep waiting.

    return emitted


class _MeteredPlanner:
    """Charges a fixed logical latency for every planner call."""

    def __init__(self, inner: Planner, clock: LogicalClock, latency: float) -> None:
        self._inner = inner
        self._clock = clock
        self._latency = latency

    def respond(self, ctx: DisruptionContext) -> str:
        try:
            return self._inner.respond(ctx)
        finally:
            self._clock.advance(self._latency)


@dataclass
class TrialTrace:
    """Everything one trial produced: the event log, every adaptation
    outcome, the final world, and the task bookkeeping buckets."""

    events: list[AgentEvent]
    adaptations: list[AdaptationOutcome]
    final_world: SystemKnowledge
    completed: list[str]
    excluded: dict[str, Verdict]
    unassigned: list[str]
    unfinished: list[str]
    end_time: float


def run_simulation(
    world: SystemKnowledge,
    fault_script: FaultScript | None = None,
    planner: Planner | None = None,
    cfg: AdaptationConfig = AdaptationConfig(),
    *,
    event_limit: int = 10_000,
    planner_latency: float = 1.0,
) -> TrialTrace:
    """Run one trial to completion on a logical clock.

    All scenario assignments are dispatched at time zero; agents then work
    through their queues. Failure notifications are routed into the
    controller, whose outcome either reassigns the orphaned tasks (config
    refresh before the new assignments) or moves them to the unassigned
    pool. The trial ends when every task is completed or excluded, or when
    no further event can occur.

    Raises EventLimitExceeded when the trace outgrows ``event_limit``,
    which signals a livelock rather than a crash.
    """
    fault_script = fault_script or FaultScript()
    planner = planner if planner is not None else OraclePlanner()
    clock = LogicalClock()
    metered = _MeteredPlanner(planner, clock, planner_latency)

    states = {
        robot_id: AgentState(robot_id=robot_id, fault=fault_script.entries.get(robot_id))
        for robot_id in world.robots
    }
    current = world
    events: list[AgentEvent] = []
    adaptations: list[AdaptationOutcome] = []
    completed: list[str] = []
    excluded: dict[str, Verdict] = {}
    unassigned: list[str] = []
    pending_failures: list[str] = []

    agenda: list[tuple[float, int, str, str, str | None]] = []
    seq = 0

    def push(when: float, op: str, robot_id: str, task_id: str | None = None) -> None:
        nonlocal seq
        heapq.heappush(agenda, (when, seq, op, robot_id, task_id))
        seq += 1

    def record(event: AgentEvent) -> None:
        events.append(event)
        if len(events) > event_limit:
            raise EventLimitExceeded(
                f"trace exceeded {event_limit} events; the trial is not converging"
            )

    def absorb(emitted: list[AgentEvent]) -> None:
        nonlocal current
        for event in emitted:
            record(event)
            robot = current.robots[event.robot_id]
            if event.kind is EventKind.TASK_STARTED:
                current = current.with_robot(
                    transition_status(robot, RobotStatus.EXECUTING, current_task=event.task_id)
                )
            elif event.kind is EventKind.TASK_COMPLETED:
                assert event.task_id is not None
                completed.append(event.task_id)
                assignments = dict(current.assignments)
                assignments.pop(event.task_id, None)
                current = current.with_assignments(assignments).with_robot(
                    transition_status(robot, RobotStatus.IDLE)
                )
            elif event.kind is EventKind.FAILURE_NOTIFICATION:
                current = current.with_robot(transition_status(robot, RobotStatus.FAILED))
                pending_failures.append(event.robot_id)

    def schedule_wake(robot_id: str) -> None:
        state = states[robot_id]
        if state.status is RobotStatus.EXECUTING and state.busy_until is not None:
            push(state.busy_until, "wake", robot_id)

    def run_adaptations() -> None:
        nonlocal current
        while pending_failures:
            failed_id = pending_failures.pop(0)
            orphans = current.assigned_to(failed_id)
            if not orphans:
                continue
            outcome, current = handle_failure(failed_id, current, metered, cfg, clock=clock)
            adaptations.append(outcome)
            now = clock.now()
            if outcome.status is AdaptationStatus.SUCCEEDED:
                assert outcome.final_plan is not None
                takeover = outcome.final_plan.exploration_robot
                record(AgentEvent(EventKind.CONFIG_REFRESHED, takeover, None, now))
                excluded.update(outcome.excluded_tasks)
                for task_id in outcome.final_plan.claimed_tasks:
                    push(now, "deliver", takeover, task_id)
                for robot_id, state in states.items():
                    if state.status is not RobotStatus.FAILED:
                        push(now, "nudge", robot_id)
            else:
                unassigned.extend(orphans)

    for task_id, robot_id in world.assignments.items():
        push(0.0, "deliver", robot_id, task_id)
    for robot_id, trigger in fault_script.entries.items():
        if isinstance(trigger, AtTime):
            push(trigger.time, "fault", robot_id)

    all_task_ids = set(world.tasks)
    while agenda:
        when, _, op, robot_id, task_id = heapq.heappop(agenda)
        if when > clock.now():
            clock.advance(when - clock.now())
        state = states[robot_id]
        if op == "deliver":
            event = AgentEvent(EventKind.TASK_ASSIGNED, robot_id, task_id, clock.now())
            record(event)
            emitted = step(state, current, (event,), now=clock.now())
        else:
            # "wake", "nudge" and "fault" all just re-evaluate the machine.
            emitted = step(state, current, now=clock.now())
        absorb(emitted)
        schedule_wake(robot_id)
        run_adaptations()
        if set(completed) | set(excluded) >= all_task_ids:
            break

    unfinished = [
        task_id
        for task_id in world.tasks
        if task_id not in set(completed) | set(excluded) | set(unassigned)
    ]
    return TrialTrace(
        events=events,
        adaptations=adaptations,
        final_world=current,
        completed=completed,
        excluded=excluded,
        unassigned=unassigned,
        unfinished=unfinished,
        end_time=clock.now(),
    )


def _verdict_doc(verdict: Verdict) -> dict:
    return {
        "valid": verdict.valid,
        "violations": [
            {"index": v.constraint_index, "code": v.code, "reason": v.reason}
            for v in verdict.violations
        ],
    }


def trace_to_ndjson(trace: TrialTrace) -> str:
    """Export a trace as newline-delimited JSON, one record per line.

    Record shapes (discriminated by the ``record`` key): ``event`` for each
    agent event, ``adaptation`` for each episode outcome, and a single
    trailing ``end`` record with the task buckets and the final time. The
    adaptation records carry enough to recompute every run metric.
    """
    lines = []
    for event in trace.events:
        lines.append(json.dumps({
            "record": "event",
            "kind": event.kind.value,
            "robot": event.robot_id,
            "task": event.task_id,
            "t": event.timestamp,
        }))
    for outcome in trace.adaptations:
        plan = outcome.final_plan
        lines.append(json.dumps({
            "record": "adaptation",
            "status": outcome.status.value,
            "attempts_used": outcome.attempts_used,
            "adaptation_time": outcome.adaptation_time,
            "exploration_robot": plan.exploration_robot if plan else None,
            "claimed_tasks": list(plan.claimed_tasks) if plan else [],
            "excluded": {
                task_id: _verdict_doc(verdict)
                for task_id, verdict in outcome.excluded_tasks.items()
            },
        }))
    lines.append(json.dumps({
        "record": "end",
        "completed": list(trace.completed),
        "excluded": list(trace.excluded),
        "unassigned": list(trace.unassigned),
        "unfinished": list(trace.unfinished),
        "end_time": trace.end_time,
    }))
    return "\n".join(lines) + "\n"


def ndjson_records(text: str) -> list[dict]:
    """Parse an exported trace back into its raw record dictionaries."""
    return [json.loads(line) for line in text.splitlines() if line.strip()]
