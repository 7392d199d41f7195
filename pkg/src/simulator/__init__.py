"""Fluid market simulation under fixed, surge and plan-driven pricing."""

from src.simulator.compare import (
    compare_policies,
    comparison_table,
    report_from_traces,
    revenue_curves,
    summarize_trace_frame,
    write_trace,
)
from src.simulator.engine import SimTrace, StepRecord, initial_state_from_plan, run_simulation, surge_multiplier
from src.simulator.policies import DynamPolicy, FixedPolicy, SurgePolicy, make_policy, parse_policy

__all__ = [
    "compare_policies",
    "comparison_table",
    "report_from_traces",
    "revenue_curves",
    "summarize_trace_frame",
    "write_trace",
    "SimTrace",
    "StepRecord",
    "initial_state_from_plan",
    "run_simulation",
    "surge_multiplier",
    "DynamPolicy",
    "FixedPolicy",
    "SurgePolicy",
    "make_policy",
    "parse_policy",
]
