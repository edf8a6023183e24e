"""Dynamic task reassignment for multi-robot manufacturing cells.

A central controller reacts to simulated robot failures by asking a
pluggable planner for a new capability configuration, validating it against
the disrupted tasks' constraints, feeding violations back until the plan is
valid, and applying the reassignment to a surviving robot.
"""

from .constraints import (
    MISSING_CAPABILITY,
    REACH_VIOLATION,
    SENSOR_GAP,
    TOOL_MISMATCH,
    Constraint,
    ConstraintKind,
    ConstraintSet,
    FeasiblePartition,
    Verdict,
    Violation,
    evaluate,
    partition_feasible,
    validate_assignment,
)
from .controller import (
    AdaptationConfig,
    AdaptationOutcome,
    AdaptationStatus,
    LogicalClock,
    MonotonicClock,
    PlannerExchange,
    gather_context,
    handle_failure,
    refresh_configuration,
)
from .errors import (
    EndpointError,
    EventLimitExceeded,
    InvariantError,
    NoFeasiblePlan,
    PlanParseError,
    PlannerError,
    ScenarioError,
    ScenarioParseError,
    ScenarioReferenceError,
)
from .harness import (
    LlmPlannerSpec,
    MetricsSummary,
    MockPlannerSpec,
    OraclePlannerSpec,
    ScriptedMode,
    StochasticMode,
    emit_report,
    run_experiment,
    summarize,
    summarize_traces,
)
from .llm import ChatEndpointConfig, ChatCompletionClient, LlmPlanner, llm_plan
from .mock import ScriptedPlanner, StochasticPlanner
from .planner import (
    DisruptionContext,
    FeedbackEntry,
    OraclePlanner,
    Planner,
    PromptText,
    ProposedPlan,
    TaskVerdict,
    build_prompt,
    oracle_plan,
    parse_plan,
    serialize_plan,
)
from .sim import (
    AfterTasksCompleted,
    AgentEvent,
    AgentState,
    AtTime,
    EventKind,
    FaultScript,
    TrialTrace,
    observe,
    run_simulation,
    step,
    trace_to_ndjson,
)
from .world import (
    Box,
    CapabilityConfiguration,
    Disc,
    Location,
    LocationKind,
    Observation,
    Quantity,
    Region,
    Robot,
    RobotStatus,
    SensorSpec,
    SystemKnowledge,
    TaskSpec,
    load_world,
    load_world_file,
    point_in_region,
    serialize_world,
    transition_status,
)

__version__ = "0.1.0"
