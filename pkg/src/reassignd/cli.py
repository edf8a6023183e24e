"""Command-line experiment runner.

Usage:
    reassignd run --scenario scenarios/dual_cell.json --fault R2:after:2 \
        --planner oracle --trials 20 --out results/

Exit codes: 0 on success, 2 on a scenario or usage error, 3 when
``--require-success`` is set and any trial exhausted its retries.
"""

from __future__ import annotations

import argparse
import sys

from .controller import AdaptationConfig
from .errors import EventLimitExceeded, ScenarioError
from .harness import (
    LlmPlannerSpec,
    MockPlannerSpec,
    OraclePlannerSpec,
    PlannerSpec,
    StochasticMode,
    emit_report,
    run_experiment,
)
from .llm import ChatEndpointConfig
from .sim import AfterTasksCompleted, AtTime, FaultScript, FaultTrigger


def _parse_fault(spec: str) -> tuple[str, FaultTrigger]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"fault spec {spec!r} must look like ROBOT:after:N or ROBOT:at:T")
    robot_id, kind, value = parts
    if kind == "after":
        return robot_id, AfterTasksCompleted(int(value))
    if kind == "at":
        return robot_id, AtTime(float(value))
    raise ValueError(f"unknown fault trigger kind {kind!r} in {spec!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reassignd")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run N trials of a scenario with fault injection")
    run.add_argument("--scenario", required=True,
                     help="scenario JSON path, or 'random' for seeded random worlds")
    run.add_argument("--planner", choices=("oracle", "mock", "llm"), default="oracle")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--max-retries", type=int, default=4)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default=None, help="directory for summary and trial traces")
    run.add_argument("--require-success", action="store_true",
                     help="exit 3 if any trial exhausts its retries")
    run.add_argument("--endpoint", default=None, help="chat endpoint base URL (llm planner)")
    run.add_argument("--model", default=None, help="model name (llm planner)")
    run.add_argument("--fault", action="append", default=[], metavar="ROBOT:after:N|ROBOT:at:T",
                     help="fault injection spec; repeatable, one per robot")
    run.add_argument("--first-attempt-prob", type=float, default=0.6,
                     help="mock planner first-attempt success probability")
    run.add_argument("--retry-prob", type=float, default=0.9,
                     help="mock planner per-retry success probability")
    run.add_argument("--dropoff-only", action="store_true",
                     help="validate reachability on dropoff endpoints only")
    run.add_argument("--planner-deadline", type=float, default=30.0,
                     help="per-call planner deadline in seconds (llm planner)")
    run.add_argument("--event-limit", type=int, default=10_000)
    run.add_argument("--planner-latency", type=float, default=1.0,
                     help="logical time charged per planner call")
    run.add_argument("--world-seed", type=int, default=None,
                     help="with --scenario random: base seed for per-trial worlds")
    return parser


def _planner_spec(args: argparse.Namespace, parser: argparse.ArgumentParser) -> PlannerSpec:
    if args.planner == "oracle":
        return OraclePlannerSpec(dropoff_only=args.dropoff_only)
    if args.planner == "mock":
        return MockPlannerSpec(
            StochasticMode(args.first_attempt_prob, args.retry_prob, seed=args.seed)
        )
    if not args.endpoint or not args.model:
        parser.error("--planner llm requires --endpoint and --model")
    return LlmPlannerSpec(
        ChatEndpointConfig(
            base_url=args.endpoint,
            model=args.model,
            timeout_s=args.planner_deadline,
        )
    )


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    planner_spec = _planner_spec(args, parser)
    cfg = AdaptationConfig(
        max_retries=args.max_retries,
        planner_deadline_s=args.planner_deadline,
        strict_dropoff_only=args.dropoff_only,
    )

    try:
        entries = dict(_parse_fault(spec) for spec in args.fault)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    random_worlds = args.scenario == "random"
    world_seed = (args.world_seed if args.world_seed is not None else args.seed) if random_worlds else None
    try:
        result = run_experiment(
            None if random_worlds else args.scenario,
            planner_spec,
            args.trials,
            cfg,
            fault_script=FaultScript(entries),
            out_dir=args.out,
            event_limit=args.event_limit,
            planner_latency=args.planner_latency,
            world_seed=world_seed,
        )
    except FileNotFoundError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except EventLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(emit_report(result.summary, "table"))
    if args.out:
        print(f"\nwrote summary and {len(result.traces)} trial trace(s) to {args.out}")
    if args.require_success and result.require_success_violated():
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
