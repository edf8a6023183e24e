"""Offline stand-in planners: scripted replay and a seeded stochastic mock.

The stochastic mock emulates an imperfect remote planner: it succeeds on the
first attempt with one probability and on each retry with another, so batch
runs reproduce a calibrated first-attempt success rate without any network.
"""

from __future__ import annotations

import json
import random
from typing import Callable, Sequence, Union

from .constraints import partition_feasible
from .errors import PlannerError
from .planner import DisruptionContext, oracle_plan, serialize_plan
from .world import encode_config

# A scripted entry is a canned response, a PlannerError to raise, or a
# callable producing a response from the context.
ScriptedEntry = Union[str, PlannerError, Callable[[DisruptionContext], str]]


class ScriptedPlanner:
    """Replays a fixed sequence of responses, one per attempt."""

    def __init__(self, entries: Sequence[ScriptedEntry], *, repeat_last: bool = False) -> None:
        if not entries:
            raise ValueError("scripted planner needs at least one entry")
        self._entries = list(entries)
        self._repeat_last = repeat_last
        self._cursor = 0

    def respond(self, ctx: DisruptionContext) -> str:
        if self._cursor >= len(self._entries):
            if not self._repeat_last:
                raise RuntimeError("scripted planner ran out of responses")
            entry = self._entries[-1]
        else:
            entry = self._entries[self._cursor]
            self._cursor += 1
        if isinstance(entry, PlannerError):
            raise entry
        if callable(entry):
            return entry(ctx)
        return entry


def flawed_response(ctx: DisruptionContext) -> str:
    """A response that is guaranteed to fail: it claims every orphaned task
    for the lexicographically first candidate, and if even that would be
    valid, it references a task that does not exist."""
    target = min(ctx.candidates, key=lambda robot: robot.id)
    claimed = [task.id for task in ctx.orphaned_tasks]
    partition = partition_feasible(ctx.orphaned_tasks, target.config, ctx.world)
    if not partition.infeasible:
        claimed.append("task-that-does-not-exist")
    return json.dumps(
        {
            "exploration_robot": target.id,
            "updated_config": encode_config(target.config),
            "claimed_tasks": claimed,
            "rationale": "take over everything",
        },
        indent=2,
    )


class StochasticPlanner:
    """Seeded mock with separate first-attempt and per-retry success odds.

    On success it answers with the oracle's plan; on failure with a
    deliberately flawed response, mirroring the typical error of claiming
    tasks the robot cannot actually perform.
    """

    def __init__(
        self,
        first_attempt_success_prob: float,
        per_retry_success_prob: float,
        seed: int = 0,
        *,
        dropoff_only: bool = False,
    ) -> None:
        for name, p in (
            ("first_attempt_success_prob", first_attempt_success_prob),
            ("per_retry_success_prob", per_retry_success_prob),
        ):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        self.first_attempt_success_prob = first_attempt_success_prob
        self.per_retry_success_prob = per_retry_success_prob
        self.dropoff_only = dropoff_only
        self._rng = random.Random(seed)

    def respond(self, ctx: DisruptionContext) -> str:
        p = (
            self.first_attempt_success_prob
            if not ctx.feedback_history
            else self.per_retry_success_prob
        )
        if self._rng.random() < p:
            return serialize_plan(oracle_plan(ctx, dropoff_only=self.dropoff_only))
        return flawed_response(ctx)
