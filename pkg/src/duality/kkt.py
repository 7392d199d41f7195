"""
Independent optimality certificate for a (plan, multipliers) pair.

Nothing here trusts the solver: envelopes are rebuilt (or taken from the caller),
every residual is recomputed from the plan and the multipliers, and the dual
bound is evaluated by maximizing each edge's Lagrangian over envelope
breakpoints, which is exact for piecewise-linear envelopes.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.core.instance import Instance, normalize_instance
from src.ironing.envelope import IronedObjective, coarsen, envelope_derivative
from src.solver.plan import DualCertificate, FlowPlan, primal_residuals
from src.solver.programs import Envelopes, SolverConfig, build_envelopes
from src.transform.expansion import expand, expand_plan
from src.utils.config import get_settings
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)


class KKTReport(BaseModel):
    """
    Example:
    {
        "passed": true,
        "stationarity": {"AB": 0.0, "BA": 1.2e-12},
        "complementary_slackness": 0.0,
        "dual_feasibility": 0.0,
        "primal": {"capacity": 0.0, "balance": 1e-16, "mass": 0.0, ...},
        "primal_objective": 1.5,
        "dual_bound": 1.5,
        "duality_gap": 2e-16,
        "reasons": []
    }
    """
    model_config = ConfigDict(frozen=True)

    passed: bool
    stationarity: Dict[str, float]  # worst residual over steps, per edge
    complementary_slackness: float
    dual_feasibility: float  # sign of multipliers and driver stationarity
    primal: Dict[str, float]
    primal_objective: float
    dual_bound: float
    duality_gap: float
    reasons: List[str] = []

    @property
    def max_stationarity(self) -> float:
        return max(self.stationarity.values(), default=0.0)


def subgradient_interval(env: IronedObjective, q: float, tol: float = 1e-9) -> Tuple[float, float]:
    """[low, high] of admissible edge prices at q; one-sided at q = 0 and q = top."""
    if q <= tol:
        return envelope_derivative(env, 0.0)[1], np.inf
    if q >= env.top - tol * max(1.0, env.top):
        return -np.inf, envelope_derivative(env, env.top)[0]
    left, right = envelope_derivative(env, q)
    return right, left


def stationarity_residual(env: IronedObjective, q: float, r: float) -> float:
    lo, hi = subgradient_interval(env, q)
    return float(max(lo - r, r - hi, 0.0))


def edge_dual(env: IronedObjective, r: float) -> float:
    """max over q of ĝ(q) - r q (attained at a breakpoint)."""
    return float(np.max(env.bv - r * env.bq))


def supply_cost(mass: float, pieces: List[Tuple[Optional[float], float]]) -> float:
    """Cheapest cost of buying `mass` units from (width, marginal cost) pieces; inf if not available."""
    total, left = 0.0, mass
    for width, cost in pieces:
        take = left if width is None else min(left, width)
        total += take * cost
        left -= take
        if left <= 1e-12:
            return total
    return np.inf


def _check_dimensions(expanded: Instance, plan: FlowPlan, cert: DualCertificate) -> None:
    edges = {e.id for e in expanded.edges}
    nodes = set(expanded.nodes)
    if cert.mode != plan.mode or len(cert.lam) != plan.horizon or len(cert.mu) != plan.horizon:
        raise ValidationError("certificate does not match the plan's mode or horizon")
    for t in range(plan.horizon):
        if set(plan.q[t]) != edges:
            raise ValidationError(f"plan step {t + 1} edges do not match the instance")
        if set(cert.mu[t]) != nodes or (cert.capacity and set(cert.capacity[t]) != nodes):
            raise ValidationError(f"certificate step {t + 1} nodes do not match the instance")


def kkt_check(
    instance: Instance,
    envelopes: Optional[Envelopes],
    plan: FlowPlan,
    cert: DualCertificate,
    feasibility_tol: Optional[float] = None,
    stationarity_tol: Optional[float] = None,
) -> KKTReport:
    """Check primal feasibility, multiplier signs, edge stationarity, slackness and the duality gap."""
    settings = get_settings()
    feasibility_tol = feasibility_tol or settings.feasibility_tol
    stationarity_tol = stationarity_tol or settings.stationarity_tol

    inst = normalize_instance(instance)
    expanded, mapping = expand(inst)
    plan = expand_plan(plan, mapping)
    _check_dimensions(expanded, plan, cert)
    if envelopes is None:
        config = SolverConfig(grid_size=cert.grid_size or settings.grid_size)
        envelopes = build_envelopes(inst, config, mapping)

    def env_at(edge_id: str, step: int) -> IronedObjective:
        per_period = envelopes[edge_id]
        period = cert.period if plan.mode == "static" else expanded.period_of(step - mapping.lag.get(edge_id, 0))
        env = per_period[period % len(per_period)]
        return coarsen(env, cert.max_segments) if cert.max_segments else env

    if plan.mode == "static":
        report = _static(expanded, env_at, plan, cert)
    else:
        report = _dynamic(expanded, env_at, plan, cert)

    tops = {e.id: max(env_at(e.id, t).top for t in range(1, plan.horizon + 1)) for e in expanded.edges}
    primal = primal_residuals(expanded.graph, plan, virtual_nodes=expanded.virtual_nodes, tops=tops)
    primal.update(report.pop("extra_primal"))

    reasons = []
    if max(primal.values()) > feasibility_tol:
        reasons.append(f"primal infeasible: {max(primal, key=primal.get)} residual {max(primal.values()):.3e}")
    if report["dual_feasibility"] > stationarity_tol:
        reasons.append(f"dual infeasible: residual {report['dual_feasibility']:.3e}")
    worst = max(report["stationarity"].values(), default=0.0)
    if worst > stationarity_tol:
        edge = max(report["stationarity"], key=report["stationarity"].get)
        reasons.append(f"stationarity fails on edge {edge!r}: residual {worst:.3e}")
    if report["complementary_slackness"] > stationarity_tol:
        reasons.append(f"complementary slackness residual {report['complementary_slackness']:.3e}")
    gap = abs(report["dual_bound"] - report["primal_objective"])
    if gap > stationarity_tol * max(1.0, abs(report["primal_objective"])):
        reasons.append(f"duality gap {gap:.3e}")

    result = KKTReport(passed=not reasons, primal=primal, duality_gap=gap, reasons=reasons, **report)
    logger.info(f"KKT check {'passed' if result.passed else 'failed'}: gap {gap:.3e}, max stationarity {worst:.3e}")
    return result


def _static(expanded: Instance, env_at, plan: FlowPlan, cert: DualCertificate) -> dict:
    lam, mu = cert.lam[0], cert.mu[0]
    q = plan.q[0]
    stationarity, primal_obj, bound = {}, 0.0, lam
    for e in expanded.edges:
        env = env_at(e.id, 1)
        r = lam + mu[e.origin] - mu[e.destination]
        stationarity[e.id] = stationarity_residual(env, q[e.id], r)
        primal_obj += float(env.value_array(np.array([min(max(q[e.id], 0.0), env.top)]))[0])
        bound += edge_dual(env, r)
    total = sum(q.values())
    return {
        "stationarity": stationarity,
        "complementary_slackness": abs(lam * (total - 1.0)),
        "dual_feasibility": max(0.0, -lam),
        "primal_objective": primal_obj,
        "dual_bound": bound,
        "extra_primal": {},
    }


def _dynamic(expanded: Instance, env_at, plan: FlowPlan, cert: DualCertificate) -> dict:
    T = plan.horizon
    virtual = set(expanded.virtual_nodes)
    kind = cert.supply.kind
    pi = cert.capacity
    mu = cert.mu
    price = cert.lam if kind != "per_step" else [0.0] * T

    stationarity: Dict[str, float] = {e.id: 0.0 for e in expanded.edges}
    primal_obj, bound = 0.0, 0.0
    slack, dual_viol = 0.0, 0.0
    for t in range(1, T + 1):
        q, w = plan.q[t - 1], plan.w[t - 1]
        out = {v: 0.0 for v in expanded.nodes}
        for e in expanded.edges:
            env = env_at(e.id, t)
            r = pi[t - 1][e.origin] + mu[t - 1][e.origin] - mu[t - 1][e.destination]
            stationarity[e.id] = max(stationarity[e.id], stationarity_residual(env, q[e.id], r))
            primal_obj += float(env.value_array(np.array([min(max(q[e.id], 0.0), env.top)]))[0])
            bound += edge_dual(env, r)
            out[e.origin] += q[e.id]
        for v in expanded.nodes:
            p = pi[t - 1][v]
            if v not in virtual:
                dual_viol = max(dual_viol, -p)
                slack = max(slack, abs(p * (w.get(v, 0.0) - out[v])))
            fixed = t == 1 and (kind == "per_step" or v in virtual)
            if fixed:
                bound += (p + mu[0][v]) * w.get(v, 0.0)
                continue
            before = mu[t - 2][v] if t > 1 else 0.0
            coef = p - before + mu[t - 1][v] - price[t - 1]
            dual_viol = max(dual_viol, coef)
            slack = max(slack, abs(coef * w.get(v, 0.0)))

    extra = {}
    if kind == "total_accumulated":
        budget = cert.supply.budget if cert.supply.budget is not None else float(T)
        used = sum(sum(w.values()) for w in plan.w)
        extra["budget"] = abs(used - budget)
        fixed_mass = sum(plan.w[0].get(v, 0.0) for v in virtual)
        bound += cert.lam[0] * (budget - fixed_mass)
        dual_viol = max(dual_viol, -cert.lam[0])
    elif kind == "soft":
        for t in range(1, T + 1):
            y = cert.lam[t - 1]
            if t == 1:
                bound -= y * sum(plan.w[0].get(v, 0.0) for v in virtual)
            for width, cost in cert.supply.marginal_costs:
                if width is None:
                    dual_viol = max(dual_viol, y - cost)
                else:
                    bound += width * max(0.0, y - cost)
            bought = supply_cost(sum(plan.w[t - 1].values()), cert.supply.marginal_costs)
            if np.isinf(bought):
                extra["supply"] = max(extra.get("supply", 0.0), 1.0)
            else:
                primal_obj -= bought
    return {
        "stationarity": stationarity,
        "complementary_slackness": slack,
        "dual_feasibility": dual_viol,
        "primal_objective": primal_obj,
        "dual_bound": bound,
        "extra_primal": extra,
    }
