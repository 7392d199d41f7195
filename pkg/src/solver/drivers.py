"""End-to-end solves: normalize -> unify travel times -> iron -> build -> solve -> contract."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from src.core.instance import Instance, check_instance, normalize_instance
from src.solver.plan import PER_STEP, DualCertificate, FlowPlan, SolveResult, SupplyConstraint
from src.solver.programs import (
    Envelopes,
    LinearProgram,
    SolverConfig,
    build_dynamic_program,
    build_envelopes,
    build_static_program,
    solve,
)
from src.transform.expansion import ExpandedGraph, contract_solution, expand, expand_distribution
from src.utils.config import get_settings

logger = logging.getLogger(__name__)


@dataclass
class SolveOutcome:
    plan: FlowPlan  # original edges; in-transit mass per edge
    unified_plan: FlowPlan
    certificate: DualCertificate  # indexed by unified nodes
    result: SolveResult
    instance: Instance  # normalized
    expanded: Instance
    mapping: ExpandedGraph
    envelopes: Envelopes
    program: LinearProgram

    @property
    def money_value(self) -> float:
        """Objective in money for the real driver population."""
        return self.plan.objective_value * self.instance.drivers


def _contract(outcome_plan: FlowPlan, result: SolveResult, mapping: ExpandedGraph, expanded: Instance, tol: float) -> FlowPlan:
    if not result.certified:
        logger.warning("Keeping the unified plan: contraction needs a feasible solve")
        return outcome_plan
    return contract_solution(outcome_plan, mapping, expanded, tol=tol)


def solve_static(instance: Instance, config: Optional[SolverConfig] = None, period: int = 0) -> SolveOutcome:
    config = config or SolverConfig.from_settings()
    inst = normalize_instance(check_instance(instance))
    expanded, mapping = expand(inst)
    envelopes = build_envelopes(inst, config, mapping)
    program = build_static_program(expanded, envelopes, config.max_segments, period=period)
    plan, cert, result = solve(program, config)
    cert = cert.model_copy(
        update={"grid_size": config.grid_size, "max_segments": config.max_segments, "period": period}
    )
    original = _contract(plan, result, mapping, expanded, config.feasibility_tol)
    return SolveOutcome(original, plan, cert, result, inst, expanded, mapping, envelopes, program)


def solve_dynamic(
    instance: Instance,
    T: Optional[int] = None,
    w1: Optional[Dict[str, float]] = None,
    supply: SupplyConstraint = PER_STEP,
    config: Optional[SolverConfig] = None,
    in_transit: Optional[Dict[str, List[float]]] = None,
) -> SolveOutcome:
    """
    Finite-horizon plan. The initial distribution defaults to the instance's,
    then to uniform over regions; in-transit mass defaults to the instance's.
    """
    config = config or SolverConfig.from_settings()
    T = T or get_settings().steps
    inst = normalize_instance(check_instance(instance))
    expanded, mapping = expand(inst)
    w1 = w1 if w1 is not None else (inst.initial_distribution or inst.uniform_distribution())
    in_transit = in_transit if in_transit is not None else inst.in_transit
    start = expand_distribution(w1, in_transit, mapping)
    envelopes = build_envelopes(inst, config, mapping)
    program = build_dynamic_program(expanded, envelopes, T, start, supply, config.dynamic_max_segments, lags=mapping.lag)
    plan, cert, result = solve(program, config)
    cert = cert.model_copy(update={"grid_size": config.grid_size, "max_segments": config.dynamic_max_segments})
    original = _contract(plan, result, mapping, expanded, config.feasibility_tol)
    return SolveOutcome(original, plan, cert, result, inst, expanded, mapping, envelopes, program)


def stationary_start(plan: FlowPlan) -> Tuple[Dict[str, float], Dict[str, List[float]]]:
    """Initial (available, in-transit) masses that reproduce a static plan's steady state."""
    transit = plan.in_transit[0] if plan.in_transit else {}
    return dict(plan.w[0]), {e: list(m) for e, m in transit.items()}
