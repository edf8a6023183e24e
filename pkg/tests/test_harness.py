import json
import math

import pytest

from reassignd import (
    AdaptationConfig,
    MetricsSummary,
    MockPlannerSpec,
    OraclePlannerSpec,
    ScriptedMode,
    StochasticMode,
    emit_report,
    oracle_plan,
    run_experiment,
    serialize_plan,
)
from reassignd.harness import (
    episode_stats_from_ndjson,
    summarize,
    summary_from_json,
)
from reassignd.sim import AfterTasksCompleted, FaultScript, trace_to_ndjson

from conftest import DUAL_CELL

R2_FAULT = FaultScript({"R2": AfterTasksCompleted(2)})


def binomial_interval(p, n):
    half = 1.96 * math.sqrt(p * (1 - p) / n)
    return p - half, p + half


class TestRunExperiment:
    def test_oracle_twenty_trials(self, tmp_path):
        result = run_experiment(
            DUAL_CELL, OraclePlannerSpec(), 20, fault_script=R2_FAULT, out_dir=tmp_path
        )
        summary = result.summary
        assert summary.trials == 20
        assert summary.successes == 20
        assert summary.success_rate == 1.0
        assert summary.first_attempt_rate == 1.0
        assert summary.mean_retries == 0.0
        assert summary.max_retries_observed == 0
        assert summary.mean_adaptation_time == summary.min_adaptation_time == 1.0
        assert (tmp_path / "summary.json").exists()
        assert (tmp_path / "summary.txt").exists()
        assert len(list((tmp_path / "trials").glob("trial-*.ndjson"))) == 20

    def test_stochastic_mock_first_attempt_rate(self):
        spec = MockPlannerSpec(StochasticMode(0.6, 0.9, seed=42))
        result = run_experiment(DUAL_CELL, spec, 20, fault_script=R2_FAULT)
        summary = result.summary
        assert summary.success_rate == 1.0
        lo, hi = binomial_interval(0.6, 20)
        assert lo <= summary.first_attempt_rate <= hi

    def test_single_scripted_trial(self, golden_ctx):
        response = serialize_plan(oracle_plan(golden_ctx))
        spec = MockPlannerSpec(ScriptedMode((response,), repeat_last=True))
        result = run_experiment(DUAL_CELL, spec, 1, fault_script=R2_FAULT)
        assert result.summary.trials == 1
        assert result.summary.successes == 1

    def test_seeded_runs_are_bit_reproducible(self, tmp_path):
        spec = MockPlannerSpec(StochasticMode(0.5, 0.8, seed=7))
        a = run_experiment(DUAL_CELL, spec, 10, fault_script=R2_FAULT,
                           out_dir=tmp_path / "a")
        b = run_experiment(DUAL_CELL, spec, 10, fault_script=R2_FAULT,
                           out_dir=tmp_path / "b")
        assert a.summary == b.summary
        for k in range(1, 11):
            assert (tmp_path / "a" / "trials" / f"trial-{k}.ndjson").read_bytes() == (
                tmp_path / "b" / "trials" / f"trial-{k}.ndjson"
            ).read_bytes()

    def test_summary_recomputable_from_traces(self):
        spec = MockPlannerSpec(StochasticMode(0.4, 0.7, seed=3))
        result = run_experiment(DUAL_CELL, spec, 15, fault_script=R2_FAULT)
        recomputed = summarize(
            [episode_stats_from_ndjson(trace_to_ndjson(trace)) for trace in result.traces]
        )
        assert recomputed == result.summary

    def test_require_success_flag_detection(self):
        always_fail = MockPlannerSpec(StochasticMode(0.0, 0.0, seed=0))
        result = run_experiment(DUAL_CELL, always_fail, 2, fault_script=R2_FAULT)
        assert result.require_success_violated()
        assert result.summary.successes == 0

    def test_random_world_mode(self):
        result = run_experiment(None, OraclePlannerSpec(), 5, world_seed=11)
        assert result.summary.trials == 5
        again = run_experiment(None, OraclePlannerSpec(), 5, world_seed=11)
        assert again.summary == result.summary

    def test_counters_are_exact(self):
        spec = MockPlannerSpec(StochasticMode(0.5, 0.9, seed=19))
        result = run_experiment(DUAL_CELL, spec, 16, fault_script=R2_FAULT)
        summary = result.summary
        assert summary.success_rate == summary.successes / summary.trials
        assert summary.first_attempt_rate == summary.first_attempt_successes / summary.trials


class TestEmitReport:
    def test_table_mirrors_metric_rows(self, golden_ctx):
        result = run_experiment(DUAL_CELL, OraclePlannerSpec(), 20, fault_script=R2_FAULT)
        table = emit_report(result.summary, "table")
        assert "Successful reassignments" in table
        assert "Success rate" in table and "100.0%" in table
        assert "Max retries observed" in table

    def test_empty_success_prints_na(self):
        from reassignd.harness import EpisodeStats

        summary = summarize([[EpisodeStats("exhausted_retries", 5, 5.0)]])
        table = emit_report(summary, "table")
        assert "n/a" in table
        assert summary.mean_adaptation_time is None

    def test_json_round_trip(self):
        from reassignd.harness import EpisodeStats

        summary = summarize(
            [[EpisodeStats("succeeded", 1, 1.0)], [EpisodeStats("succeeded", 3, 3.0)]]
        )
        text = emit_report(summary, "json")
        assert summary_from_json(text) == summary
        assert json.loads(text)["trials"] == 2

    def test_unknown_format_rejected(self):
        from reassignd.harness import EpisodeStats

        summary = summarize([[EpisodeStats("succeeded", 1, 1.0)]])
        with pytest.raises(ValueError):
            emit_report(summary, "yaml")


class TestMetricsInvariants:
    def test_invalid_summary_rejected(self):
        with pytest.raises(ValueError):
            MetricsSummary(
                trials=1, successes=2, success_rate=2.0,
                first_attempt_successes=0, first_attempt_rate=0.0,
                mean_adaptation_time=None, min_adaptation_time=None,
                max_adaptation_time=None, mean_retries=None, max_retries_observed=0,
            )

    def test_zero_episode_trials_are_vacuous_successes(self):
        summary = summarize([[], []])
        assert summary.successes == 2
        assert summary.first_attempt_successes == 2
        assert summary.mean_adaptation_time is None
        assert summary.mean_retries is None
