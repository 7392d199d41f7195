"""
LangGraph pipeline from an order log (or an instance file) to a policy comparison.

Nodes:
1. estimate - orders -> instance (skipped when an instance file is given)
2. solve    - static or dynamic program, contracted plan plus multipliers
3. certify  - independent KKT check; the run stops here on failure
4. simulate - FIXED, SURGE and DYNAM from the plan's initial state
5. report   - comparison table and revenue curves
"""

import json
import logging
from pathlib import Path
from typing import Literal, Optional

from langgraph.graph import END, StateGraph

from src.core.instance import load_instance, save_instance
from src.duality.kkt import kkt_check
from src.ingestion.estimation import EstimationConfig, estimate_instance
from src.ingestion.loader import orders_frame, parse_orders
from src.pipeline.state import PipelineState
from src.simulator.compare import compare_policies, comparison_table, revenue_curves, write_trace
from src.simulator.policies import DynamPolicy, FixedPolicy, SurgePolicy
from src.solver.drivers import solve_dynamic, solve_static
from src.solver.plan import save_model
from src.solver.programs import SolverConfig
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.5117  # money per minute when no estimate is available


def _out(state: PipelineState) -> Path:
    path = Path(state["out_dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def estimate_node(state: PipelineState) -> PipelineState:
    """Parse, filter and fit the order log into an instance."""
    parsed = parse_orders(state["orders_path"])
    result = estimate_instance(orders_frame(parsed.records), EstimationConfig(hourly=state["mode"] == "dynamic"))
    instance = result.to_instance()
    path = _out(state) / "instance.json"
    save_instance(instance, path)
    (_out(state) / "estimation.json").write_text(result.model_dump_json(indent=2), encoding="utf-8")
    return {
        **state,
        "instance": instance,
        "alpha": state["alpha"] or result.alpha,
        "artifacts": {**state["artifacts"], "instance": str(path)},
    }


def load_node(state: PipelineState) -> PipelineState:
    return {**state, "instance": load_instance(state["instance_path"])}


def solve_node(state: PipelineState) -> PipelineState:
    instance = state["instance"]
    config = SolverConfig(**state["config"])
    dynamic = state["mode"] == "dynamic" or (state["mode"] == "auto" and instance.is_dynamic)
    if dynamic:
        outcome = solve_dynamic(instance, T=state["steps"], config=config)
    else:
        outcome = solve_static(instance, config=config)
    out = _out(state)
    save_model(outcome.plan, out / "plan.json")
    save_model(outcome.certificate, out / "certificate.json")
    return {
        **state,
        "outcome": outcome,
        "solve_status": outcome.result.status,
        "certified": outcome.result.certified,
        "artifacts": {**state["artifacts"], "plan": str(out / "plan.json"), "certificate": str(out / "certificate.json")},
    }


def certify_node(state: PipelineState) -> PipelineState:
    outcome = state["outcome"]
    config = SolverConfig(**state["config"])
    report = kkt_check(outcome.instance, outcome.envelopes, outcome.unified_plan, outcome.certificate,
                       config.feasibility_tol, config.stationarity_tol)
    path = _out(state) / "kkt.json"
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    errors = list(state["errors"])
    if not state["certified"]:
        errors.append(f"solve not certified (status {state['solve_status']})")
    if not report.passed:
        errors.extend(report.reasons)
    return {
        **state,
        "kkt_passed": report.passed,
        "kkt_reasons": report.reasons,
        "errors": errors,
        "artifacts": {**state["artifacts"], "kkt": str(path)},
    }


def simulate_node(state: PipelineState) -> PipelineState:
    outcome = state["outcome"]
    alpha = state["alpha"] or DEFAULT_ALPHA
    policies = [
        DynamPolicy(plan=outcome.plan, grid_size=outcome.certificate.grid_size,
                    max_segments=outcome.certificate.max_segments, period=outcome.certificate.period),
        SurgePolicy(alpha=alpha, beta_max=state["beta_max"]),
        FixedPolicy(alpha=alpha),
    ]
    traces = compare_policies(state["instance"], policies, steps=state["steps"])
    out = _out(state)
    for name, trace in traces.items():
        write_trace(trace, out / name.lower())
    summaries = [
        {k: trace.summary()[k] for k in ("time_average_revenue", "total_revenue", "supply_ratio_deviation")} | {"policy": name}
        for name, trace in traces.items()
    ]
    return {**state, "summaries": summaries, "traces": traces}


def report_node(state: PipelineState) -> PipelineState:
    traces = state["traces"]
    out = _out(state)
    comparison_table(traces).to_csv(out / "comparison.csv")
    revenue_curves(traces).to_csv(out / "revenue_curves.csv")
    (out / "summary.json").write_text(json.dumps(state["summaries"], indent=2), encoding="utf-8")
    for s in state["summaries"]:
        logger.info(f"{s['policy']}: time-average revenue {s['time_average_revenue']:.6g}, "
                    f"supply-ratio deviation {s['supply_ratio_deviation']:.4f}")
    return {**state, "artifacts": {**state["artifacts"], "comparison": str(out / "comparison.csv")}}


def route_start(state: PipelineState) -> Literal["estimate", "load"]:
    return "load" if state.get("instance_path") else "estimate"


def route_after_certify(state: PipelineState) -> Literal["simulate", "end"]:
    return "simulate" if state["certified"] and state["kkt_passed"] else "end"


def build_pipeline() -> StateGraph:
    """
    Flow:
        START -> (estimate | load) -> solve -> certify -> simulate -> report -> END
    certify routes straight to END when the solve or the KKT check fails.
    """
    workflow = StateGraph(PipelineState)

    workflow.add_node("estimate", estimate_node)
    workflow.add_node("load", load_node)
    workflow.add_node("solve", solve_node)
    workflow.add_node("certify", certify_node)
    workflow.add_node("simulate", simulate_node)
    workflow.add_node("report", report_node)

    workflow.set_conditional_entry_point(route_start, {"estimate": "estimate", "load": "load"})
    workflow.add_edge("estimate", "solve")
    workflow.add_edge("load", "solve")
    workflow.add_edge("solve", "certify")
    workflow.add_conditional_edges("certify", route_after_certify, {"simulate": "simulate", "end": END})
    workflow.add_edge("simulate", "report")
    workflow.add_edge("report", END)

    return workflow


def compile_pipeline():
    return build_pipeline().compile()


def run_pipeline(
    out_dir: str,
    orders_path: Optional[str] = None,
    instance_path: Optional[str] = None,
    mode: str = "auto",
    steps: int = 96,
    alpha: Optional[float] = None,
    beta_max: float = 5.0,
    config: Optional[SolverConfig] = None,
) -> PipelineState:
    """Run the whole pipeline; exactly one of orders_path / instance_path is required."""
    if bool(orders_path) == bool(instance_path):
        raise ValidationError("give exactly one of an order log or an instance file")
    config = config or SolverConfig.from_settings()
    initial_state: PipelineState = {
        "orders_path": orders_path,
        "instance_path": instance_path,
        "out_dir": out_dir,
        "mode": mode,
        "steps": steps,
        "alpha": alpha,
        "beta_max": beta_max,
        "config": config.model_dump(),
        "instance": None,
        "outcome": None,
        "solve_status": "",
        "certified": False,
        "kkt_passed": False,
        "kkt_reasons": [],
        "summaries": [],
        "traces": {},
        "artifacts": {},
        "errors": [],
    }
    final_state = compile_pipeline().invoke(initial_state)
    if final_state["errors"]:
        logger.warning(f"Pipeline stopped early: {final_state['errors']}")
    return final_state
