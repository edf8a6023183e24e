"""Exception types shared across the package."""

from __future__ import annotations


class ScenarioError(Exception):
    """A scenario document or world description is unusable."""


class ScenarioParseError(ScenarioError):
    """The scenario text is malformed or a value has the wrong shape."""


class ScenarioReferenceError(ScenarioError):
    """An identifier points at something that does not exist."""


class InvariantError(ScenarioError):
    """A structural invariant of the world or one of its types is violated."""


# Machine codes carried by retryable planner failures.
NO_JSON_FOUND = "NO_JSON_FOUND"
SCHEMA_MISMATCH = "SCHEMA_MISMATCH"
UNKNOWN_REFERENCE = "UNKNOWN_REFERENCE"
TIMEOUT = "TIMEOUT"
HTTP_ERROR = "HTTP_ERROR"
NO_FEASIBLE_PLAN = "NO_FEASIBLE_PLAN"


class PlannerError(Exception):
    """Base for planner failures the control loop treats as retryable.

    Every instance carries a stable machine ``code`` and a human-readable
    ``reason``; both end up in the feedback appended to the next prompt.
    """

    def __init__(self, reason: str, *, code: str = "PLANNER_ERROR") -> None:
        super().__init__(f"{code}: {reason}")
        self.code = code
        self.reason = reason


class PlanParseError(PlannerError):
    """A planner response could not be turned into a usable plan."""


class EndpointError(PlannerError):
    """The remote chat endpoint failed or timed out."""


class NoFeasiblePlan(PlannerError):
    """No candidate robot can validly take over any orphaned task."""

    def __init__(self, reason: str = "no candidate robot has a feasible task") -> None:
        super().__init__(reason, code=NO_FEASIBLE_PLAN)


class EventLimitExceeded(Exception):
    """The simulation produced more events than allowed; likely a livelock."""
