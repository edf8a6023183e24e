import re
from dataclasses import replace

import pytest

from reassignd import (
    AdaptationConfig,
    AdaptationStatus,
    Box,
    EndpointError,
    InvariantError,
    LogicalClock,
    OraclePlanner,
    RobotStatus,
    ScriptedPlanner,
    build_prompt,
    gather_context,
    handle_failure,
    oracle_plan,
    partition_feasible,
    refresh_configuration,
    serialize_plan,
    serialize_world,
    transition_status,
    validate_assignment,
)
from reassignd.constraints import MISSING_CAPABILITY, REACH_VIOLATION
from reassignd.errors import TIMEOUT
from reassignd.mock import flawed_response
from reassignd.planner import SECTION_FEEDBACK, SECTION_SYSTEM


def feedback_entry_count(prompt):
    section = prompt.section(SECTION_FEEDBACK)
    if section is None:
        return 0
    return len(re.findall(r"^Attempt \d+:", section.body, re.MULTILINE))


def valid_response(ctx):
    return serialize_plan(oracle_plan(ctx))


class TestGatherContext:
    def test_dual_cell_context(self, disrupted_world):
        ctx = gather_context(disrupted_world, "R2")
        assert [r.id for r in ctx.candidates] == ["R1"]
        assert [t.id for t in ctx.orphaned_tasks] == ["m2-task", "m3-task", "b3-task", "b4-task"]
        assert ctx.feedback_history == ()

    def test_all_other_robots_failed_means_no_candidates(self, disrupted_world):
        world = disrupted_world.with_robot(
            transition_status(disrupted_world.robots["R1"], RobotStatus.FAILED)
        )
        ctx = gather_context(world, "R2")
        assert ctx.candidates == ()

    def test_context_world_is_embedded_in_prompt(self, golden_ctx):
        prompt = build_prompt(golden_ctx)
        assert serialize_world(golden_ctx.world) in prompt.section(SECTION_SYSTEM).body


class TestRefreshConfiguration:
    def test_identity_refresh_returns_equal_world(self, golden_world):
        same = refresh_configuration(golden_world, "R1", golden_world.robots["R1"].config)
        assert same == golden_world

    def test_enlarged_box_only_grows_the_feasible_set(self, golden_ctx):
        world = golden_ctx.world
        config = world.robots["R1"].config
        before = partition_feasible(golden_ctx.orphaned_tasks, config, world)
        box = config.reachability()
        grown = config.with_entry(
            "reachability",
            Box(box.min_corner, (2000.0, box.max_corner[1], box.max_corner[2])),
        )
        refreshed = refresh_configuration(world, "R1", grown)
        after = partition_feasible(
            golden_ctx.orphaned_tasks, refreshed.robots["R1"].config, refreshed
        )
        assert set(before.feasible) <= set(after.feasible)
        assert set(after.feasible) == {"m2-task", "m3-task", "b3-task", "b4-task"}

    def test_refresh_on_failed_robot_rejected(self, disrupted_world):
        with pytest.raises(InvariantError):
            refresh_configuration(
                disrupted_world, "R2", disrupted_world.robots["R2"].config
            )

    def test_refresh_without_reachability_rejected(self, golden_world):
        config = golden_world.robots["R1"].config
        bare = type(config)({k: v for k, v in config.entries.items() if k != "reachability"})
        with pytest.raises(InvariantError):
            refresh_configuration(golden_world, "R1", bare)


class TestHandleFailure:
    def test_dual_cell_oracle_first_attempt(self, disrupted_world):
        outcome, world = handle_failure(
            "R2", disrupted_world, OraclePlanner(), clock=LogicalClock()
        )
        assert outcome.status is AdaptationStatus.SUCCEEDED
        assert outcome.attempts_used == 1
        assert len(outcome.episode) == 1
        assert outcome.final_plan.exploration_robot == "R1"
        assert outcome.final_plan.claimed_tasks == ("m2-task", "b3-task")
        assert set(outcome.excluded_tasks) == {"m3-task", "b4-task"}
        for verdict in outcome.excluded_tasks.values():
            assert [v.code for v in verdict.violations] == [REACH_VIOLATION]
        assert world.assignments == {
            "cell1-sort-1": "R1",
            "cell1-sort-2": "R1",
            "m2-task": "R1",
            "b3-task": "R1",
        }

    @pytest.mark.parametrize("failures", [0, 1, 2, 3, 4])
    def test_scripted_failures_then_success(self, disrupted_world, golden_ctx, failures):
        planner = ScriptedPlanner([flawed_response] * failures + [valid_response])
        outcome, _ = handle_failure(
            "R2", disrupted_world, planner, AdaptationConfig(max_retries=4),
            clock=LogicalClock(),
        )
        assert outcome.status is AdaptationStatus.SUCCEEDED
        assert outcome.attempts_used == failures + 1
        for index, exchange in enumerate(outcome.episode, start=1):
            assert exchange.attempt_number == index
            assert feedback_entry_count(exchange.prompt) == index - 1

    def test_always_invalid_exhausts_after_five_attempts(self, disrupted_world):
        planner = ScriptedPlanner([flawed_response], repeat_last=True)
        outcome, world = handle_failure(
            "R2", disrupted_world, planner, AdaptationConfig(max_retries=4),
            clock=LogicalClock(),
        )
        assert outcome.status is AdaptationStatus.EXHAUSTED_RETRIES
        assert outcome.attempts_used == 5
        assert outcome.final_plan is None
        # Atomicity: the failed robot's tasks are simply unassigned; nothing
        # else about the pre-failure assignment map changed.
        assert world.assignments == {"cell1-sort-1": "R1", "cell1-sort-2": "R1"}
        assert world.robots["R1"].config == disrupted_world.robots["R1"].config

    def test_no_candidates(self, disrupted_world):
        world = disrupted_world.with_robot(
            transition_status(disrupted_world.robots["R1"], RobotStatus.FAILED)
        )
        outcome, after = handle_failure("R2", world, OraclePlanner(), clock=LogicalClock())
        assert outcome.status is AdaptationStatus.NO_CANDIDATES
        assert outcome.attempts_used == 0
        assert after.assignments == {"cell1-sort-1": "R1", "cell1-sort-2": "R1"}

    def test_endpoint_errors_are_fed_back_and_retried(self, disrupted_world):
        planner = ScriptedPlanner(
            [EndpointError("deadline exceeded", code=TIMEOUT), valid_response]
        )
        outcome, _ = handle_failure("R2", disrupted_world, planner, clock=LogicalClock())
        assert outcome.status is AdaptationStatus.SUCCEEDED
        assert outcome.attempts_used == 2
        assert outcome.episode[0].failure_code == TIMEOUT
        assert TIMEOUT in build_prompt_text_of_attempt(outcome, 2)

    def test_parse_failures_are_fed_back_and_retried(self, disrupted_world):
        planner = ScriptedPlanner(["no json here at all", valid_response])
        outcome, _ = handle_failure("R2", disrupted_world, planner, clock=LogicalClock())
        assert outcome.attempts_used == 2
        assert outcome.episode[0].failure_code == "NO_JSON_FOUND"

    def test_plan_without_reachability_is_rejected_with_feedback(self, disrupted_world):
        def headless(ctx):
            plan = oracle_plan(ctx)
            config = type(plan.updated_config)(
                {k: v for k, v in plan.updated_config.entries.items() if k != "reachability"}
            )
            return serialize_plan(replace(plan, updated_config=config, claimed_tasks=()))

        # With existing work on R1 the broken config shows up as per-task
        # MISSING_CAPABILITY violations.
        planner = ScriptedPlanner([headless, valid_response])
        outcome, _ = handle_failure("R2", disrupted_world, planner, clock=LogicalClock())
        assert outcome.status is AdaptationStatus.SUCCEEDED
        assert outcome.attempts_used == 2
        first = outcome.episode[0]
        assert any(
            violation.code == MISSING_CAPABILITY
            for verdict in first.verdicts.values()
            for violation in verdict.violations
        )

        # With no claimed and no existing work, the structural check still
        # refuses to apply a config the refresh step would reject.
        idle_r1 = disrupted_world.with_assignments(
            {t: r for t, r in disrupted_world.assignments.items() if r != "R1"}
        )
        planner = ScriptedPlanner([headless, valid_response])
        outcome, _ = handle_failure("R2", idle_r1, planner, clock=LogicalClock())
        assert outcome.attempts_used == 2
        assert outcome.episode[0].failure_code == MISSING_CAPABILITY

    def test_plan_breaking_existing_assignment_is_rejected(self, disrupted_world):
        def selfish(ctx):
            # Claims m2-task with a region so tight that R1's own cell-1
            # tasks would no longer validate.
            plan = oracle_plan(ctx)
            tight = plan.updated_config.with_entry(
                "reachability", Box((1150.0, 250.0, -10.0), (1300.0, 750.0, 10.0))
            )
            return serialize_plan(replace(plan, updated_config=tight, claimed_tasks=("m2-task",)))

        planner = ScriptedPlanner([selfish, valid_response])
        outcome, _ = handle_failure("R2", disrupted_world, planner, clock=LogicalClock())
        assert outcome.status is AdaptationStatus.SUCCEEDED
        assert outcome.attempts_used == 2
        first = outcome.episode[0]
        assert not first.verdicts["cell1-sort-1"].valid
        assert not first.verdicts["cell1-sort-2"].valid

    def test_safety_every_final_assignment_validates(self, disrupted_world):
        outcome, world = handle_failure(
            "R2", disrupted_world, OraclePlanner(), clock=LogicalClock()
        )
        assert outcome.status is AdaptationStatus.SUCCEEDED
        for task_id, robot_id in world.assignments.items():
            verdict = validate_assignment(
                world.tasks[task_id], world.robots[robot_id].config, world
            )
            assert verdict.valid, (task_id, robot_id, verdict)

    def test_deterministic_with_oracle_and_logical_clock(self, disrupted_world):
        first = handle_failure("R2", disrupted_world, OraclePlanner(), clock=LogicalClock())
        second = handle_failure("R2", disrupted_world, OraclePlanner(), clock=LogicalClock())
        assert first == second

    def test_preconditions(self, golden_world, disrupted_world):
        with pytest.raises(ValueError):
            handle_failure("R9", disrupted_world, OraclePlanner())
        with pytest.raises(ValueError):
            handle_failure("R2", golden_world, OraclePlanner())  # not failed
        no_orphans = disrupted_world.with_assignments(
            {t: r for t, r in disrupted_world.assignments.items() if r != "R2"}
        )
        with pytest.raises(ValueError):
            handle_failure("R2", no_orphans, OraclePlanner())

    def test_full_task_load_on_raw_disruption(self, golden_world):
        # Disrupt R2 while all six of its tasks are still assigned: the two
        # in-cell sorting tasks are feasible for R1 too.
        world = golden_world.with_robot(
            transition_status(golden_world.robots["R2"], RobotStatus.FAILED)
        )
        outcome, after = handle_failure("R2", world, OraclePlanner(), clock=LogicalClock())
        assert outcome.final_plan.claimed_tasks == ("cell2-sort-1", "m2-task", "b3-task")
        assert set(outcome.excluded_tasks) == {"cell2-sort-2", "m3-task", "b4-task"}
        assert all(r == "R1" for r in after.assignments.values())


def build_prompt_text_of_attempt(outcome, attempt_number):
    for exchange in outcome.episode:
        if exchange.attempt_number == attempt_number:
            return exchange.prompt.text()
    raise AssertionError(f"no attempt {attempt_number}")
