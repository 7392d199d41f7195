"""Run several policies on one market and tabulate revenue and supply-ratio statistics."""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.instance import Instance
from src.simulator.engine import SimTrace, initial_state_from_plan, run_simulation
from src.simulator.policies import DynamPolicy, policy_name

logger = logging.getLogger(__name__)


def compare_policies(
    instance: Instance,
    policies: Sequence,
    steps: Optional[int] = None,
    w_init: Optional[Dict[str, float]] = None,
    in_transit: Optional[Dict[str, List[float]]] = None,
    step_minutes: Optional[int] = None,
) -> Dict[str, SimTrace]:
    """
    Simulate every policy from the same initial state. Without an explicit
    state, the first dynam plan's initial state is shared by all policies.
    """
    if w_init is None:
        dynam = next((p for p in policies if isinstance(p, DynamPolicy)), None)
        if dynam is not None:
            w_init, in_transit = initial_state_from_plan(dynam.plan)
    traces: Dict[str, SimTrace] = {}
    for policy in policies:
        name = policy_name(policy)
        while name in traces:
            name += "'"
        traces[name] = run_simulation(instance, policy, steps, w_init, step_minutes, in_transit)
    return traces


def comparison_table(traces: Dict[str, SimTrace]) -> pd.DataFrame:
    """One row per policy: time-average revenue, total revenue, supply-ratio deviation."""
    rows = []
    for name, trace in traces.items():
        summary = trace.summary()
        summary["policy"] = name
        rows.append(summary)
    return pd.DataFrame(rows).set_index("policy")


def revenue_curves(traces: Dict[str, SimTrace]) -> pd.DataFrame:
    return pd.DataFrame({name: trace.revenue_series() for name, trace in traces.items()},
                        index=pd.RangeIndex(1, 1 + max(len(t.steps) for t in traces.values()), name="step"))


def summarize_trace_frame(frame: pd.DataFrame, name: str) -> Dict[str, Union[str, float]]:
    """Summary statistics recomputed from a long-format trace CSV."""
    revenue = frame[(frame["scope"] == "system") & (frame["metric"] == "revenue")].sort_values("step")["value"]
    ratios = frame[(frame["scope"] == "node") & (frame["metric"] == "supply_ratio")]["value"].dropna()
    return {
        "policy": name,
        "steps": int(revenue.size),
        "time_average_revenue": float(revenue.mean()) if revenue.size else 0.0,
        "total_revenue": float(revenue.sum()),
        "supply_ratio_deviation": float(np.abs(ratios - 1.0).mean()) if ratios.size else 0.0,
    }


def report_from_traces(paths: Sequence[Union[str, Path]]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Comparison table (plus per-step revenue columns) from saved trace CSVs."""
    rows, curves = [], {}
    for path in paths:
        path = Path(path)
        frame = pd.read_csv(path)
        name = path.parent.name if path.stem == "trace" else path.stem
        rows.append(summarize_trace_frame(frame, name))
        revenue = frame[(frame["scope"] == "system") & (frame["metric"] == "revenue")].set_index("step")["value"]
        curves[name] = revenue
    logger.info(f"Compared {len(rows)} traces")
    table = pd.DataFrame(rows).set_index("policy")
    return table, pd.DataFrame(curves).sort_index()


def write_trace(trace: SimTrace, out_dir: Union[str, Path]) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace.to_frame().to_csv(out_dir / "trace.csv", index=False)
    (out_dir / "summary.json").write_text(json.dumps(trace.summary(), indent=2), encoding="utf-8")
