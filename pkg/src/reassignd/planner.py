"""Reassignment planning: prompt building, plan parsing, and the oracle.

A planner receives a :class:`DisruptionContext` and answers with raw text
that must contain one JSON plan object. Two reference implementations live
in this package: :class:`OraclePlanner` (deterministic brute force, always
sound against the validator) here, and an LLM-backed planner in
:mod:`reassignd.llm`. Both sit behind the same text interface so the
control loop treats every planner identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol, Sequence

from .constraints import Verdict, partition_feasible
from .errors import (
    NO_JSON_FOUND,
    SCHEMA_MISMATCH,
    UNKNOWN_REFERENCE,
    NoFeasiblePlan,
    PlanParseError,
    ScenarioError,
)
from .world import (
    CapabilityConfiguration,
    Robot,
    SystemKnowledge,
    TaskSpec,
    decode_config,
    encode_config,
    serialize_world,
)

SECTION_ROLE = "Role and objectives"
SECTION_POLICY = "Adaptation policy"
SECTION_ELIGIBILITY = "Task eligibility constraints"
SECTION_SYSTEM = "System-level data"
SECTION_FEEDBACK = "Validation feedback"

_SECTION_ORDER = (
    SECTION_ROLE,
    SECTION_POLICY,
    SECTION_ELIGIBILITY,
    SECTION_SYSTEM,
    SECTION_FEEDBACK,
)

PLAN_SCHEMA_TEXT = """{
  "exploration_robot": "<id of the chosen candidate robot>",
  "updated_config": { <capability configuration, same encoding as the system-level data> },
  "claimed_tasks": ["<task id>", "..."],
  "rationale": "<one or two sentences>"
}"""


@dataclass(frozen=True)
class ProposedPlan:
    """A candidate reassignment: which robot takes which tasks, and how it
    must be configured. The validator is the sole authority on whether the
    plan is acceptable."""

    exploration_robot: str
    updated_config: CapabilityConfiguration
    claimed_tasks: tuple[str, ...]
    rationale: str = ""


@dataclass(frozen=True)
class TaskVerdict:
    task_id: str
    verdict: Verdict


@dataclass(frozen=True)
class FeedbackEntry:
    """Record of one rejected attempt, rendered into the next prompt.

    Validation rejections carry per-task ``violations``; parse and endpoint
    failures carry a ``failure_code``/``failure_reason`` pair instead.
    Exactly one of the two forms is present.
    """

    attempt_number: int
    rejected_plan: ProposedPlan | None
    violations: tuple[TaskVerdict, ...] = ()
    failure_code: str | None = None
    failure_reason: str | None = None

    def __post_init__(self) -> None:
        if self.attempt_number < 1:
            raise ValueError("attempt_number starts at 1")
        if bool(self.violations) == (self.failure_code is not None):
            raise ValueError(
                "feedback carries either violations or a failure code, never both"
            )


@dataclass(frozen=True)
class DisruptionContext:
    """Everything the planner gets to see for one adaptation episode."""

    disrupted_robot: Robot
    orphaned_tasks: tuple[TaskSpec, ...]
    candidates: tuple[Robot, ...]
    world: SystemKnowledge
    feedback_history: tuple[FeedbackEntry, ...] = ()


@dataclass(frozen=True)
class PromptSection:
    heading: str
    body: str


@dataclass(frozen=True)
class PromptText:
    """The structured prompt: four fixed sections plus, after the first
    rejected attempt, a validation feedback section."""

    sections: tuple[PromptSection, ...]

    def __post_init__(self) -> None:
        headings = tuple(section.heading for section in self.sections)
        if headings not in (_SECTION_ORDER[:4], _SECTION_ORDER):
            raise ValueError(f"unexpected prompt section layout: {headings}")

    def section(self, heading: str) -> PromptSection | None:
        for candidate in self.sections:
            if candidate.heading == heading:
                return candidate
        return None

    def text(self) -> str:
        return "\n\n".join(
            f"## {section.heading}\n{section.body}" for section in self.sections
        )


def _role_body(ctx: DisruptionContext) -> str:
    orphaned = ", ".join(task.id for task in ctx.orphaned_tasks) or "none"
    candidates = ", ".join(robot.id for robot in ctx.candidates) or "none"
    return (
        "You are the central controller of a multi-robot manufacturing system.\n"
        f"Robot {ctx.disrupted_robot.id} has failed and cannot execute its remaining tasks.\n"
        f"Orphaned tasks: {orphaned}.\n"
        f"Candidate robots: {candidates}.\n"
        "Choose exactly one candidate robot, produce its updated capability\n"
        "configuration, and claim every orphaned task that robot can validly execute."
    )


_POLICY_BODY = (
    "Use the chosen robot's existing capability configuration as a baseline and\n"
    "change only fields that are directly relevant to the reassigned tasks.\n"
    "Leave tasks that would violate any constraint unclaimed; the controller\n"
    "excludes them from the assignment.\n"
    "Reply with exactly one JSON object, no code fences and no surrounding prose,\n"
    "matching this schema (unknown keys are rejected):\n"
    + PLAN_SCHEMA_TEXT
)

_ELIGIBILITY_BODY = (
    "A task may be claimed only if every constraint attached to it holds for the\n"
    "updated configuration:\n"
    "- reachability: every checked endpoint position (pickup and dropoff unless\n"
    "  stated otherwise) lies inside the configuration's 'reachability' region.\n"
    "- sensor_coverage: for each required modality, the configuration's 'sensing'\n"
    "  list contains it and a single sensor of that modality covers both the\n"
    "  pickup and the dropoff location.\n"
    "- tool: the configuration's 'tool' list contains the required tool.\n"
    "A configuration that lacks a capability key inspected by a constraint fails\n"
    "that constraint."
)


def render_feedback_entry(entry: FeedbackEntry) -> str:
    if entry.failure_code is not None:
        return f"Attempt {entry.attempt_number}: {entry.failure_code}: {entry.failure_reason}"
    plan = entry.rejected_plan
    assert plan is not None
    claimed = ", ".join(plan.claimed_tasks)
    lines = [
        f"Attempt {entry.attempt_number}: plan chose robot {plan.exploration_robot} "
        f"claiming [{claimed}] and was rejected:"
    ]
    for task_verdict in entry.violations:
        for violation in task_verdict.verdict.violations:
            lines.append(
                f"  - task {task_verdict.task_id}: {violation.code}: {violation.reason}"
            )
    return "\n".join(lines)


def build_prompt(ctx: DisruptionContext) -> PromptText:
    """Build the structured prompt for the context; a pure function, so two
    calls on the same context yield byte-identical text."""
    sections = [
        PromptSection(SECTION_ROLE, _role_body(ctx)),
        PromptSection(SECTION_POLICY, _POLICY_BODY),
        PromptSection(SECTION_ELIGIBILITY, _ELIGIBILITY_BODY),
        PromptSection(
            SECTION_SYSTEM,
            "Millimetres and degrees throughout.\n" + serialize_world(ctx.world),
        ),
    ]
    if ctx.feedback_history:
        entries = sorted(ctx.feedback_history, key=lambda entry: entry.attempt_number)
        body = "Earlier attempts failed validation. Fix the issues listed below.\n" + "\n".join(
            render_feedback_entry(entry) for entry in entries
        )
        sections.append(PromptSection(SECTION_FEEDBACK, body))
    return PromptText(tuple(sections))


def serialize_plan(plan: ProposedPlan) -> str:
    """Render a plan as the JSON document the parser accepts."""
    return json.dumps(
        {
            "exploration_robot": plan.exploration_robot,
            "updated_config": encode_config(plan.updated_config),
            "claimed_tasks": list(plan.claimed_tasks),
            "rationale": plan.rationale,
        },
        indent=2,
    )


def _first_json_object(text: str) -> dict:
    decoder = json.JSONDecoder()
    index = text.find("{")
    while index != -1:
        try:
            candidate, _ = decoder.raw_decode(text, index)
        except ValueError:
            pass
        else:
            if isinstance(candidate, dict):
                return candidate
        index = text.find("{", index + 1)
    raise PlanParseError("response contains no JSON object", code=NO_JSON_FOUND)


_PLAN_REQUIRED = {"exploration_robot", "updated_config", "claimed_tasks"}
_PLAN_OPTIONAL = {"rationale"}


def parse_plan(response_text: str, ctx: DisruptionContext) -> ProposedPlan:
    """Extract and check the single JSON plan object in a planner response.

    Raises :class:`PlanParseError` with code ``NO_JSON_FOUND``,
    ``SCHEMA_MISMATCH`` or ``UNKNOWN_REFERENCE``; the control loop turns
    each into feedback and a retry rather than a crash.
    """
    data = _first_json_object(response_text)
    missing = _PLAN_REQUIRED - set(data)
    if missing:
        raise PlanParseError(f"plan is missing keys {sorted(missing)}", code=SCHEMA_MISMATCH)
    unknown = set(data) - _PLAN_REQUIRED - _PLAN_OPTIONAL
    if unknown:
        raise PlanParseError(f"plan has unknown keys {sorted(unknown)}", code=SCHEMA_MISMATCH)
    robot_id = data["exploration_robot"]
    if not isinstance(robot_id, str) or not robot_id:
        raise PlanParseError("exploration_robot must be a robot id", code=SCHEMA_MISMATCH)
    claimed = data["claimed_tasks"]
    if not isinstance(claimed, list) or not all(isinstance(t, str) for t in claimed):
        raise PlanParseError("claimed_tasks must be a list of task ids", code=SCHEMA_MISMATCH)
    if len(set(claimed)) != len(claimed):
        raise PlanParseError("claimed_tasks contains duplicates", code=SCHEMA_MISMATCH)
    rationale = data.get("rationale", "")
    if not isinstance(rationale, str):
        raise PlanParseError("rationale must be a string", code=SCHEMA_MISMATCH)
    try:
        config = decode_config(data["updated_config"], "updated_config")
    except ScenarioError as exc:
        raise PlanParseError(str(exc), code=SCHEMA_MISMATCH) from exc

    candidate_ids = {robot.id for robot in ctx.candidates}
    if robot_id not in candidate_ids:
        if robot_id == ctx.disrupted_robot.id:
            reason = f"exploration robot {robot_id} is the disrupted robot itself"
        else:
            reason = f"unknown exploration robot {robot_id!r}"
        raise PlanParseError(reason, code=UNKNOWN_REFERENCE)
    orphan_ids = {task.id for task in ctx.orphaned_tasks}
    stray = [task_id for task_id in claimed if task_id not in orphan_ids]
    if stray:
        raise PlanParseError(
            f"claimed tasks {stray} are not orphaned tasks of {ctx.disrupted_robot.id}",
            code=UNKNOWN_REFERENCE,
        )
    return ProposedPlan(robot_id, config, tuple(claimed), rationale)


def oracle_plan(ctx: DisruptionContext, *, dropoff_only: bool = False) -> ProposedPlan:
    """Deterministic reference plan: keep each candidate's existing
    configuration, and hand the orphaned tasks to the candidate that can
    validly execute the most of them (ties broken by lexicographic robot id).

    Raises :class:`NoFeasiblePlan` when no candidate can take any task,
    including when there is no candidate at all.
    """
    best: tuple[Robot, tuple[str, ...]] | None = None
    for robot in sorted(ctx.candidates, key=lambda robot: robot.id):
        partition = partition_feasible(
            ctx.orphaned_tasks, robot.config, ctx.world, dropoff_only=dropoff_only
        )
        if best is None or len(partition.feasible) > len(best[1]):
            best = (robot, partition.feasible)
    if best is None or not best[1]:
        raise NoFeasiblePlan()
    robot, feasible = best
    return ProposedPlan(
        exploration_robot=robot.id,
        updated_config=robot.config,
        claimed_tasks=feasible,
        rationale=(
            f"{robot.id} can validly execute {len(feasible)} of "
            f"{len(ctx.orphaned_tasks)} orphaned tasks with its current configuration"
        ),
    )


class Planner(Protocol):
    """Anything that turns a disruption context into a raw text response."""

    def respond(self, ctx: DisruptionContext) -> str: ...


class OraclePlanner:
    """Planner wrapper around :func:`oracle_plan`; always validator-sound."""

    def __init__(self, *, dropoff_only: bool = False) -> None:
        self.dropoff_only = dropoff_only

    def respond(self, ctx: DisruptionContext) -> str:
        return serialize_plan(oracle_plan(ctx, dropoff_only=self.dropoff_only))
