"""State schema for the end-to-end LangGraph pipeline."""

from typing import Any, Dict, List, Literal, Optional, TypedDict


class PolicySummary(TypedDict):
    """Time-average results of one simulated policy."""
    policy: str
    time_average_revenue: float
    total_revenue: float
    supply_ratio_deviation: float


class PipelineState(TypedDict):
    """
    State that flows through estimate -> solve -> certify -> simulate -> report.

    Example JSON state after certify:
    {
        "orders_path": "data/orders.csv",
        "instance_path": null,
        "out_dir": "runs/demo",
        "mode": "static",
        "steps": 96,
        "alpha": 0.5117,
        "instance": {"nodes": ["R1", "R2"], "edges": [...], "demand": {...}},
        "solve_status": "optimal",
        "certified": true,
        "kkt_passed": true,
        "kkt_reasons": [],
        "summaries": [],
        "artifacts": {"instance": "runs/demo/instance.json", "plan": "runs/demo/plan.json"},
        "errors": []
    }

    Example JSON state after report:
    {
        ...
        "summaries": [
            {"policy": "DYNAM", "time_average_revenue": 0.81, "total_revenue": 77.8, "supply_ratio_deviation": 0.02},
            {"policy": "SURGE", "time_average_revenue": 0.66, "total_revenue": 63.4, "supply_ratio_deviation": 0.19},
            {"policy": "FIXED", "time_average_revenue": 0.57, "total_revenue": 54.7, "supply_ratio_deviation": 0.43}
        ],
        "artifacts": {..., "comparison": "runs/demo/comparison.csv"}
    }
    """
    # Input
    orders_path: Optional[str]
    instance_path: Optional[str]
    out_dir: str
    mode: Literal["auto", "static", "dynamic"]
    steps: int
    alpha: Optional[float]
    beta_max: float
    config: Dict[str, Any]  # SolverConfig fields

    # Estimation / loading
    instance: Optional[Any]  # Instance

    # Solve and certification
    outcome: Optional[Any]  # SolveOutcome
    solve_status: str
    certified: bool
    kkt_passed: bool
    kkt_reasons: List[str]

    # Simulation and report
    summaries: List[PolicySummary]
    traces: Dict[str, Any]  # policy name -> SimTrace
    artifacts: Dict[str, str]
    errors: List[str]
