"""The central controller's closed adaptation loop.

On a robot failure the controller gathers context, asks the planner for a
reassignment, validates every claimed task, feeds violations back into the
next prompt, and retries up to a cap. Only a fully validated plan mutates
the world; on exhaustion the failed robot's tasks simply move to the
unassigned pool and everything else is left untouched.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Protocol

from .constraints import MISSING_CAPABILITY, Verdict, validate_assignment
from .errors import InvariantError, PlannerError
from .planner import (
    DisruptionContext,
    FeedbackEntry,
    Planner,
    PromptText,
    ProposedPlan,
    TaskVerdict,
    build_prompt,
    parse_plan,
)
from .world import (
    CapabilityConfiguration,
    RobotStatus,
    SystemKnowledge,
)


class Clock(Protocol):
    def now(self) -> float: ...


class MonotonicClock:
    """Wall clock for live runs."""

    def now(self) -> float:
        return time.monotonic()


class LogicalClock:
    """Deterministic clock for simulation; advanced explicitly."""

    def __init__(self, start: float = 0.0) -> None:
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("logical time cannot move backwards")
        self._now += dt


class AdaptationStatus(str, Enum):
    SUCCEEDED = "succeeded"
    EXHAUSTED_RETRIES = "exhausted_retries"
    NO_CANDIDATES = "no_candidates"


@dataclass(frozen=True)
class AdaptationConfig:
    """Knobs of the adaptation loop.

    ``max_retries`` counts retries after the first attempt, so the planner
    is consulted at most ``max_retries + 1`` times. ``planner_deadline_s``
    is the per-call budget for remote planners (wired into the chat client
    timeout). ``strict_dropoff_only`` narrows reachability validation to
    dropoff endpoints only.
    """

    max_retries: int = 4
    planner_deadline_s: float = 30.0
    strict_dropoff_only: bool = False

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


@dataclass(frozen=True)
class PlannerExchange:
    """One planner round: the prompt sent, the raw reply, and how it fared."""

    attempt_number: int
    prompt: PromptText
    raw_response: str
    plan: ProposedPlan | None
    failure_code: str | None
    failure_reason: str | None
    verdicts: dict[str, Verdict] = field(default_factory=dict)


@dataclass(frozen=True)
class AdaptationOutcome:
    """Full record of one adaptation episode."""

    status: AdaptationStatus
    episode: tuple[PlannerExchange, ...]
    final_plan: ProposedPlan | None
    attempts_used: int
    adaptation_time: float
    excluded_tasks: dict[str, Verdict] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.attempts_used != len(self.episode):
            raise ValueError("attempts_used must equal the episode length")
        if (self.status is AdaptationStatus.SUCCEEDED) != (self.final_plan is not None):
            raise ValueError("final_plan is present exactly on success")


def gather_context(world: SystemKnowledge, failed_robot_id: str) -> DisruptionContext:
    """Collect the disruption context: the failed robot's configuration, its
    orphaned tasks, and the surviving candidates, with empty feedback."""
    robot = world.robots.get(failed_robot_id)
    if robot is None:
        raise ValueError(f"unknown robot {failed_robot_id!r}")
    orphaned = tuple(world.tasks[task_id] for task_id in world.assigned_to(failed_robot_id))
    candidates = tuple(
        candidate
        for candidate in world.robots.values()
        if candidate.id != failed_robot_id and candidate.status is not RobotStatus.FAILED
    )
    return DisruptionContext(
        disrupted_robot=robot,
        orphaned_tasks=orphaned,
        candidates=candidates,
        world=world,
    )


def refresh_configuration(
    world: SystemKnowledge,
    robot_id: str,
    new_config: CapabilityConfiguration,
) -> SystemKnowledge:
    """Apply an updated configuration to a live robot; the returned world is
    identical apart from that robot, and is re-validated."""
    robot = world.robots.get(robot_id)
    if robot is None:
        raise ValueError(f"unknown robot {robot_id!r}")
    if robot.status is RobotStatus.FAILED:
        raise InvariantError(f"cannot refresh configuration of failed robot {robot_id}")
    if new_config.reachability() is None:
        raise InvariantError("new configuration must include a 'reachability' region")
    updated = world.with_robot(replace(robot, config=new_config))
    updated.validate()
    return updated


def _without_robot_assignments(world: SystemKnowledge, robot_id: str) -> dict[str, str]:
    return {
        task_id: assignee
        for task_id, assignee in world.assignments.items()
        if assignee != robot_id
    }


def handle_failure(
    failed_robot_id: str,
    world: SystemKnowledge,
    planner: Planner,
    cfg: AdaptationConfig = AdaptationConfig(),
    *,
    clock: Clock | None = None,
) -> tuple[AdaptationOutcome, SystemKnowledge]:
    """Run one adaptation episode for a failed robot.

    The loop asks the planner, parses the reply, validates every claimed
    task (and, for safety, every task already assigned to the chosen robot,
    since the updated configuration must not break existing work), and on
    any failure appends feedback and retries. A fully validated plan is
    applied atomically: the exploration robot's configuration is refreshed,
    claimed tasks move to it, and every unclaimed orphaned task is recorded
    as excluded with its verdict.

    Returns the outcome and the resulting world. On exhaustion or when no
    candidate exists, the world is unchanged except that the failed robot's
    tasks are cleared into the unassigned pool.

    Raises ValueError if the robot does not exist, is not in the failed
    state, or has no orphaned tasks (nothing to adapt).
    """
    clock = clock or MonotonicClock()
    robot = world.robots.get(failed_robot_id)
    if robot is None:
        raise ValueError(f"unknown robot {failed_robot_id!r}")
    if robot.status is not RobotStatus.FAILED:
        raise ValueError(f"robot {failed_robot_id} is not in the failed state")

    started = clock.now()
    ctx = gather_context(world, failed_robot_id)
    orphan_ids = tuple(task.id for task in ctx.orphaned_tasks)
    if not orphan_ids:
        raise ValueError(f"robot {failed_robot_id} has no orphaned tasks")
    stripped = _without_robot_assignments(world, failed_robot_id)

    if not ctx.candidates:
        outcome = AdaptationOutcome(
            status=AdaptationStatus.NO_CANDIDATES,
            episode=(),
            final_plan=None,
            attempts_used=0,
            adaptation_time=clock.now() - started,
        )
        return outcome, world.with_assignments(stripped)

    episode: list[PlannerExchange] = []
    max_attempts = cfg.max_retries + 1
    for attempt in range(1, max_attempts + 1):
        prompt = build_prompt(ctx)
        raw_response = ""
        plan: ProposedPlan | None = None
        failure_code: str | None = None
        failure_reason: str | None = None
        verdicts: dict[str, Verdict] = {}
        bad: list[TaskVerdict] = []
        try:
            raw_response = planner.respond(ctx)
            plan = parse_plan(raw_response, ctx)
        except PlannerError as exc:
            failure_code = exc.code
            failure_reason = exc.reason

        if plan is not None:
            keep = world.assigned_to(plan.exploration_robot)
            for task_id in (*plan.claimed_tasks, *keep):
                verdicts[task_id] = validate_assignment(
                    world.tasks[task_id],
                    plan.updated_config,
                    world,
                    dropoff_only=cfg.strict_dropoff_only,
                )
            bad = [
                TaskVerdict(task_id, verdict)
                for task_id, verdict in verdicts.items()
                if not verdict.valid
            ]
            if not bad and plan.updated_config.reachability() is None:
                # The config would be rejected by the refresh step; turn it
                # into correctable feedback instead of crashing there.
                failure_code = MISSING_CAPABILITY
                failure_reason = "updated_config must include a 'reachability' region"

        if plan is not None and not bad and failure_code is None:
            episode.append(
                PlannerExchange(attempt, prompt, raw_response, plan, None, None, verdicts)
            )
            refreshed = refresh_configuration(world, plan.exploration_robot, plan.updated_config)
            assignments = _without_robot_assignments(refreshed, failed_robot_id)
            for task_id in plan.claimed_tasks:
                assignments[task_id] = plan.exploration_robot
            excluded = {
                task_id: validate_assignment(
                    world.tasks[task_id],
                    plan.updated_config,
                    world,
                    dropoff_only=cfg.strict_dropoff_only,
                )
                for task_id in orphan_ids
                if task_id not in plan.claimed_tasks
            }
            outcome = AdaptationOutcome(
                status=AdaptationStatus.SUCCEEDED,
                episode=tuple(episode),
                final_plan=plan,
                attempts_used=attempt,
                adaptation_time=clock.now() - started,
                excluded_tasks=excluded,
            )
            return outcome, refreshed.with_assignments(assignments)

        episode.append(
            PlannerExchange(
                attempt, prompt, raw_response, plan, failure_code, failure_reason, verdicts
            )
        )
        entry = FeedbackEntry(
            attempt_number=attempt,
            rejected_plan=plan,
            violations=tuple(bad),
            failure_code=failure_code,
            failure_reason=failure_reason,
        )
        ctx = replace(ctx, feedback_history=ctx.feedback_history + (entry,))

    outcome = AdaptationOutcome(
        status=AdaptationStatus.EXHAUSTED_RETRIES,
        episode=tuple(episode),
        final_plan=None,
        attempts_used=max_attempts,
        adaptation_time=clock.now() - started,
    )
    return outcome, world.with_assignments(stripped)
