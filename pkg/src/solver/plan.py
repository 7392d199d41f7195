"""Primal and dual outputs of the solver, plus primal feasibility residuals."""

import json
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.graph import CityGraph
from src.utils.errors import ValidationError


class SupplyConstraint(BaseModel):
    """
    How driver supply limits a dynamic plan.

    per_step          - fixed population of 1 moving by the transition equation
    total_accumulated - one budget on driver-steps summed over the horizon
    soft              - no hard cap; supply bought per step at non-decreasing marginal cost
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["per_step", "total_accumulated", "soft"] = "per_step"
    budget: Optional[float] = Field(default=None, gt=0)  # default: horizon length
    marginal_costs: List[Tuple[Optional[float], float]] = [(None, 0.0)]  # (mass width or unbounded, money per unit)

    @model_validator(mode="after")
    def _check_costs(self):
        costs = [c for _, c in self.marginal_costs]
        if any(b < a for a, b in zip(costs, costs[1:])):
            raise ValueError("marginal costs must be non-decreasing")
        for width, _ in self.marginal_costs[:-1]:
            if width is None:
                raise ValueError("only the last marginal-cost piece may be unbounded")
        return self


PER_STEP = SupplyConstraint()


class FlowPlan(BaseModel):
    """
    Throughput per edge and available drivers per node, one entry per step.

    Static plans have a single step. `in_transit` maps an edge to the mass still
    travelling on it by remaining steps (only on original, non-unified graphs).
    """
    model_config = ConfigDict(frozen=True)

    mode: Literal["static", "dynamic"] = "static"
    horizon: int = 1
    q: List[Dict[str, float]]
    w: List[Dict[str, float]]
    in_transit: List[Dict[str, List[float]]] = []
    objective_value: float = 0.0
    unified: bool = True
    supply: SupplyConstraint = PER_STEP

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.q) != self.horizon or len(self.w) != self.horizon:
            raise ValueError("q and w need one entry per step")
        return self

    def driver_mass(self, step: int = 0) -> float:
        transit = sum(sum(v) for v in self.in_transit[step].values()) if self.in_transit else 0.0
        return sum(self.w[step].values()) + transit


class DualCertificate(BaseModel):
    """
    Multipliers of the solved program.

    Static: lam[0] is the value of one more unit of total driver mass, mu[0][v]
    the value of relaxing flow balance at v. Dynamic: capacity[t][v] prices the
    availability constraint, mu[t][v] is the continuation value of a driver at v
    after step t, lam[t] the value of one extra driver at the best node at step t
    (the budget multiplier under total_accumulated, the step supply price under soft).
    """
    model_config = ConfigDict(frozen=True)

    mode: Literal["static", "dynamic"] = "static"
    lam: List[float]
    mu: List[Dict[str, float]]
    capacity: List[Dict[str, float]] = []
    supply: SupplyConstraint = PER_STEP
    grid_size: Optional[int] = None  # envelope resolution the multipliers refer to
    max_segments: Optional[int] = None
    period: int = 0  # demand period a static certificate was solved for


class SolveResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: str
    certified: bool
    pivots: int
    residuals: Dict[str, float]


def _out_flow(graph: CityGraph, q: Dict[str, float]) -> Dict[str, float]:
    out = {v: 0.0 for v in graph.nodes}
    for e in graph.edges:
        out[e.origin] += q.get(e.id, 0.0)
    return out


def _in_flow(graph: CityGraph, q: Dict[str, float]) -> Dict[str, float]:
    inflow = {v: 0.0 for v in graph.nodes}
    for e in graph.edges:
        inflow[e.destination] += q.get(e.id, 0.0)
    return inflow


def primal_residuals(
    graph: CityGraph,
    plan: FlowPlan,
    virtual_nodes: Iterable[str] = (),
    w1: Optional[Dict[str, float]] = None,
    tops: Optional[Dict[str, float]] = None,
) -> Dict[str, float]:
    """Largest violation of each primal constraint family (all >= 0)."""
    virtual = set(virtual_nodes)
    edge_ids = {e.id for e in graph.edges}
    for qs, ws in zip(plan.q, plan.w):
        if set(qs) - edge_ids or set(ws) - set(graph.nodes):
            raise ValidationError("plan refers to edges or nodes outside the graph")

    res = {"nonnegativity": 0.0, "capacity": 0.0, "balance": 0.0, "mass": 0.0, "demand": 0.0}
    for t in range(plan.horizon):
        q, w = plan.q[t], plan.w[t]
        res["nonnegativity"] = max([res["nonnegativity"], *(-x for x in q.values()), *(-x for x in w.values())])
        out, inflow = _out_flow(graph, q), _in_flow(graph, q)
        for v in graph.nodes:
            gap = out[v] - w.get(v, 0.0)
            res["capacity"] = max(res["capacity"], abs(gap) if v in virtual else max(0.0, gap))
        if tops:
            res["demand"] = max([res["demand"], *(q.get(e, 0.0) - top for e, top in tops.items())])

        if plan.mode == "static":
            res["balance"] = max([res["balance"], *(abs(out[v] - inflow[v]) for v in graph.nodes)])
            res["mass"] = max(res["mass"], abs(sum(w.values()) - 1.0))
        elif t + 1 < plan.horizon:
            nxt = plan.w[t + 1]
            for v in graph.nodes:
                if plan.supply.kind != "per_step" and v not in virtual:
                    continue
                expected = w.get(v, 0.0) - out[v] + inflow[v]
                res["balance"] = max(res["balance"], abs(nxt.get(v, 0.0) - expected))

    if plan.mode == "dynamic" and plan.supply.kind == "per_step":
        res["mass"] = max(abs(sum(w.values()) - 1.0) for w in plan.w)
        if w1 is not None:
            res["mass"] = max([res["mass"], *(abs(plan.w[0].get(v, 0.0) - m) for v, m in w1.items())])
    return res


def save_model(model: BaseModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(model.model_dump(mode="json"), indent=2), encoding="utf-8")


def load_plan(path: Union[str, Path]) -> FlowPlan:
    try:
        return FlowPlan.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except Exception as e:
        raise ValidationError(f"cannot load plan {path}: {e}") from e


def load_certificate(path: Union[str, Path]) -> DualCertificate:
    try:
        return DualCertificate.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except Exception as e:
        raise ValidationError(f"cannot load certificate {path}: {e}") from e
