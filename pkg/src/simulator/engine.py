"""
Discrete-time fluid market.

State per step: available drivers per region and, per edge, the mass still
travelling with r = 1..travel_time-1 steps to go. Each step:
1. the policy quotes prices (a mixture for dynam) and demand is induced
2. acceptances are rationed proportionally when a region is short of drivers
3. dynam also moves its planned flow empty where demand falls short
4. launched drivers enter the edge pipeline and rejoin at the destination
A trip's revenue is recognized in equal shares over the steps it travels,
the way the dynamic program values travel-time chains.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq

from src.core.demand import DemandModel
from src.core.graph import Edge
from src.core.instance import Instance, normalize_instance
from src.ironing.envelope import IronedObjective, coarsen, iron
from src.ironing.mixture import PriceMixture, price_mixture
from src.simulator.policies import DynamPolicy, FixedPolicy, SurgePolicy, policy_name
from src.utils.config import get_settings
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

MASS_TOL = 1e-9


class StepRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: int
    revenue: float
    available: Dict[str, float]  # at the start of the step
    in_transit: Dict[str, List[float]]
    demand: Dict[str, float]  # induced at the quoted prices
    accepted: Dict[str, float]
    relocated: Dict[str, float]
    price: Dict[str, Optional[float]]  # expected quoted price; None when the edge is closed
    supply_ratio: Dict[str, Optional[float]]  # None when there is no local demand

    @property
    def driver_mass(self) -> float:
        return sum(self.available.values()) + sum(sum(m) for m in self.in_transit.values())


class SimTrace(BaseModel):
    policy: str
    step_minutes: int
    drivers: float = 1.0  # multiply normalized revenue by this for money
    steps: List[StepRecord]

    def revenue_series(self) -> np.ndarray:
        return np.array([s.revenue for s in self.steps])

    def time_average_revenue(self) -> float:
        return float(self.revenue_series().mean()) if self.steps else 0.0

    def supply_ratio_deviation(self) -> float:
        """Mean |supply ratio - 100%| over all (step, region) cells with demand."""
        gaps = [abs(r - 1.0) for s in self.steps for r in s.supply_ratio.values() if r is not None]
        return float(np.mean(gaps)) if gaps else 0.0

    def to_frame(self) -> pd.DataFrame:
        """Long format: step, scope, id, metric, value."""
        rows = []
        for s in self.steps:
            rows.append((s.step, "system", "", "revenue", s.revenue))
            rows.append((s.step, "system", "", "driver_mass", s.driver_mass))
            for v, m in s.available.items():
                rows.append((s.step, "node", v, "available", m))
                rows.append((s.step, "node", v, "supply_ratio", s.supply_ratio[v]))
            for e in s.accepted:
                rows.append((s.step, "edge", e, "demand", s.demand[e]))
                rows.append((s.step, "edge", e, "accepted", s.accepted[e]))
                rows.append((s.step, "edge", e, "relocated", s.relocated[e]))
                rows.append((s.step, "edge", e, "price", s.price[e]))
                rows.append((s.step, "edge", e, "in_transit", sum(s.in_transit.get(e, []))))
        frame = pd.DataFrame(rows, columns=["step", "scope", "id", "metric", "value"])
        frame["value"] = pd.to_numeric(frame["value"])
        return frame

    def summary(self) -> Dict[str, float]:
        revenue = self.revenue_series()
        return {
            "policy": self.policy,
            "steps": len(self.steps),
            "time_average_revenue": self.time_average_revenue(),
            "total_revenue": float(revenue.sum()),
            "time_average_revenue_money": self.time_average_revenue() * self.drivers,
            "supply_ratio_deviation": self.supply_ratio_deviation(),
        }


def surge_multiplier(
    available: float,
    curves: Sequence[Tuple[DemandModel, float]],
    alpha: float,
    beta_range: Tuple[float, float] = (1.0, 5.0),
    tol: float = 1e-12,
) -> float:
    """
    Beta in the range where sum_e D(alpha * beta * minutes_e) meets `available`,
    bracketed with Brent's method; beta_min when supply already suffices,
    beta_max when even beta_max cannot clear.
    """
    if available < 0:
        raise ValidationError(f"available supply must be non-negative, got {available}")
    low, high = beta_range

    def excess(beta: float) -> float:
        return sum(curve.evaluate(alpha * beta * minutes) for curve, minutes in curves) - available

    if excess(low) <= 0:
        return low
    if excess(high) > 0:
        return high
    return float(brentq(excess, low, high, xtol=tol))


class _Market:
    """
    Mutable fluid state; one instance per run. Every pipeline slot also carries
    the revenue its trips still have to recognize, one share per remaining step.
    """

    def __init__(
        self,
        instance: Instance,
        available: Dict[str, float],
        in_transit: Dict[str, List[float]],
        value: Callable[[int, Edge, float], float],
    ):
        self.instance = instance
        self.available = {v: float(available.get(v, 0.0)) for v in instance.nodes}
        self.pipeline: Dict[str, List[float]] = {}
        self.owed: Dict[str, List[float]] = {}
        for e in instance.edges:
            k = e.travel_time
            masses = list(in_transit.get(e.id, []))
            if len(masses) > k - 1:
                raise ValidationError(f"edge {e.id!r} takes {k} steps; got {len(masses)} in-transit entries")
            self.pipeline[e.id] = masses + [0.0] * (k - 1 - len(masses))
            # slot j arrives after j + 1 more steps, so its cohort launched at step j + 2 - k
            self.owed[e.id] = [
                value(j + 2 - k, e, m) / k if m > MASS_TOL else 0.0
                for j, m in enumerate(self.pipeline[e.id])
            ]

    def mass(self) -> float:
        return sum(self.available.values()) + sum(sum(m) for m in self.pipeline.values())

    def recognize(self, earned: Dict[str, float]) -> float:
        """Revenue of this step: a 1/travel_time share of every trip on the road, new ones included."""
        return sum(earned[e.id] / e.travel_time + sum(self.owed[e.id]) for e in self.instance.edges)

    def advance(self, launched: Dict[str, float], earned: Dict[str, float]) -> None:
        nxt = dict(self.available)
        for e in self.instance.edges:
            nxt[e.origin] -= launched[e.id]
        for e in self.instance.edges:
            pipe = self.pipeline[e.id]
            if e.travel_time == 1:
                nxt[e.destination] += launched[e.id]
                continue
            nxt[e.destination] += pipe[0]
            self.pipeline[e.id] = pipe[1:] + [launched[e.id]]
            self.owed[e.id] = self.owed[e.id][1:] + [earned[e.id] / e.travel_time]
        self.available = {v: max(m, 0.0) if m > -MASS_TOL else m for v, m in nxt.items()}


def _ration(instance: Instance, demand: Dict[str, float], available: Dict[str, float]) -> Dict[str, float]:
    accepted = dict(demand)
    for v in instance.nodes:
        out = [e.id for e in instance.edges if e.origin == v]
        total = sum(demand[e] for e in out)
        if total > available[v] > 0:
            share = available[v] / total
            accepted.update({e: demand[e] * share for e in out})
        elif total > 0 and available[v] <= 0:
            accepted.update({e: 0.0 for e in out})
    return accepted


def _supply_ratio(instance: Instance, available: Dict[str, float], demand: Dict[str, float]) -> Dict[str, Optional[float]]:
    ratio = {}
    for v in instance.nodes:
        total = sum(demand[e.id] for e in instance.edges if e.origin == v)
        ratio[v] = available[v] / total if total > 1e-15 else None
    return ratio


class _DynamPlanner:
    def __init__(self, instance: Instance, policy: DynamPolicy):
        settings = get_settings()
        self.instance = instance
        self.plan = policy.plan
        self.static_period = policy.period
        self.grid_size = policy.grid_size or settings.grid_size
        self.max_segments = policy.max_segments
        self.cache: Dict[Tuple[int, str, float], Optional[PriceMixture]] = {}
        self.envelopes: Dict[Tuple[int, str], Tuple[DemandModel, IronedObjective]] = {}
        edge_ids = {e.id for e in instance.edges}
        if self.plan.unified and any(e.travel_time > 1 for e in instance.edges):
            raise ValidationError("dynam needs a plan on original edges; contract unified plans first")
        if set(self.plan.q[0]) != edge_ids:
            raise ValidationError("plan edges do not match the instance")

    def planned(self, step: int) -> Dict[str, float]:
        if self.plan.mode == "static":
            return self.plan.q[0]
        if step > self.plan.horizon:
            raise ValidationError(f"dynamic plan covers {self.plan.horizon} steps; simulation asked for step {step}")
        return self.plan.q[step - 1]

    def mixture(self, step: int, edge: Edge, q: float) -> Tuple[DemandModel, Optional[PriceMixture]]:
        period = self.static_period if self.plan.mode == "static" else self.instance.period_of(step)
        key = (period, edge.id, q)
        if (period, edge.id) not in self.envelopes:
            entry = self.instance.demand[edge.id]
            curve = entry[period % len(entry)] if isinstance(entry, list) else entry
            env = iron(curve, edge.cost, self.instance.objective, self.grid_size)
            if self.max_segments:
                env = coarsen(env, self.max_segments)
            self.envelopes[(period, edge.id)] = (curve, env)
        curve, env = self.envelopes[(period, edge.id)]
        if key not in self.cache:
            self.cache[key] = price_mixture(env, curve, min(q, env.top)) if q > 1e-12 else None
        return curve, self.cache[key]

    def value(self, step: int, edge: Edge, q: float) -> float:
        """Expected revenue of launching q on edge at step under the plan's prices."""
        _, mix = self.mixture(step, edge, q)
        if mix is None or mix.target <= 0:
            return 0.0
        return mix.expected_revenue(edge.cost) * q / mix.target


def initial_state_from_plan(plan) -> Tuple[Dict[str, float], Dict[str, List[float]]]:
    transit = plan.in_transit[0] if plan.in_transit else {}
    return dict(plan.w[0]), {e: list(m) for e, m in transit.items()}


def run_simulation(
    instance: Instance,
    policy,
    steps: Optional[int] = None,
    w_init: Optional[Dict[str, float]] = None,
    step_minutes: Optional[int] = None,
    in_transit: Optional[Dict[str, List[float]]] = None,
    sampled: bool = False,
    seed: Optional[int] = None,
) -> SimTrace:
    """
    Simulate `steps` steps of the normalized market under `policy`.

    A trip's revenue is recognized in equal shares over the steps it travels.
    Mass already on the road at step 1 is valued at the policy's quote: the
    plan's prices for dynam, the unsurged per-minute price otherwise.
    """
    if not isinstance(policy, (FixedPolicy, SurgePolicy, DynamPolicy)):
        raise ValidationError(f"unsupported policy {policy!r}")
    settings = get_settings()
    steps = settings.steps if steps is None else steps
    if steps < 1:
        raise ValidationError(f"steps must be at least 1, got {steps}")
    step_minutes = step_minutes or instance.step_minutes
    inst = normalize_instance(instance).model_copy(update={"step_minutes": step_minutes})

    if w_init is None:
        if isinstance(policy, DynamPolicy):
            w_init, plan_transit = initial_state_from_plan(policy.plan)
            in_transit = in_transit if in_transit is not None else plan_transit
        else:
            w_init = inst.initial_distribution or inst.uniform_distribution()
    in_transit = in_transit if in_transit is not None else (inst.in_transit or {})
    if set(w_init) - set(inst.nodes) or any(m < -MASS_TOL for m in w_init.values()):
        raise ValidationError("initial distribution must be non-negative over known regions")

    planner = _DynamPlanner(inst, policy) if isinstance(policy, DynamPolicy) else None

    def quoted_value(step: int, edge: Edge, mass: float) -> float:
        return mass * (policy.alpha * edge.trip_minutes(step_minutes) - edge.cost)

    market = _Market(inst, w_init, in_transit, planner.value if planner is not None else quoted_value)
    if abs(market.mass() - 1.0) > 1e-8:
        raise ValidationError(f"initial driver mass is {market.mass():.10g}, expected 1")

    rng = np.random.default_rng(settings.seed if seed is None else seed)
    records: List[StepRecord] = []
    for t in range(1, steps + 1):
        available = dict(market.available)
        transit = {e: list(m) for e, m in market.pipeline.items() if m}
        if planner is not None:
            demand, accepted, launched, price, earned = _dynam_step(inst, planner, t, available, sampled, rng)
        else:
            demand, accepted, price, earned = _benchmark_step(inst, policy, t, available, step_minutes)
            launched = accepted
        relocated = {e: max(launched[e] - accepted[e], 0.0) for e in launched}
        records.append(StepRecord(
            step=t,
            revenue=market.recognize(earned),
            available=available,
            in_transit=transit,
            demand=demand,
            accepted=accepted,
            relocated=relocated,
            price=price,
            supply_ratio=_supply_ratio(inst, available, demand),
        ))
        market.advance(launched, earned)
        if abs(market.mass() - 1.0) > MASS_TOL * 10:
            raise RuntimeError(f"driver mass drifted to {market.mass():.12g} at step {t}")

    trace = SimTrace(policy=policy_name(policy), step_minutes=step_minutes, drivers=instance.drivers, steps=records)
    logger.info(
        f"Simulated {trace.policy} for {steps} steps: time-average revenue {trace.time_average_revenue():.6g}, "
        f"supply-ratio deviation {trace.supply_ratio_deviation():.4f}"
    )
    return trace


def _benchmark_step(inst: Instance, policy, t: int, available: Dict[str, float], step_minutes: int):
    prices: Dict[str, float] = {}
    for v in inst.nodes:
        out = [e for e in inst.edges if e.origin == v]
        beta = 1.0
        if isinstance(policy, SurgePolicy):
            curves = [(inst.curve(e.id, t), e.trip_minutes(step_minutes)) for e in out]
            beta = surge_multiplier(available[v], curves, policy.alpha, (policy.beta_min, policy.beta_max))
        for e in out:
            prices[e.id] = policy.alpha * beta * e.trip_minutes(step_minutes)
    demand = {e.id: inst.curve(e.id, t).evaluate(prices[e.id]) for e in inst.edges}
    accepted = _ration(inst, demand, available)
    earned = {e.id: accepted[e.id] * (prices[e.id] - e.cost) for e in inst.edges}
    return demand, accepted, dict(prices), earned


def _dynam_step(inst: Instance, planner: _DynamPlanner, t: int, available: Dict[str, float], sampled: bool, rng):
    planned = dict(planner.planned(t))
    for v in inst.nodes:
        out = [e.id for e in inst.edges if e.origin == v]
        total = sum(planned[e] for e in out)
        if total > available[v] + 1e-9:
            logger.warning(f"DYNAM plan moves {total:.6g} from {v} at step {t} but only {available[v]:.6g} is available; scaling down")
            share = available[v] / total if total > 0 else 0.0
            planned.update({e: planned[e] * share for e in out})

    demand, accepted, price, earned = {}, {}, {}, {}
    for e in inst.edges:
        q = planned[e.id]
        curve, mix = planner.mixture(t, e, q)
        if mix is None:
            demand[e.id], accepted[e.id], price[e.id], earned[e.id] = 0.0, 0.0, None, 0.0
            continue
        if sampled:
            k = int(rng.choice(len(mix.entries), p=[x.probability for x in mix.entries]))
            p = mix.entries[k].price
            d = 0.0 if math.isinf(p) else curve.evaluate(p)
            demand[e.id], price[e.id] = d, (None if math.isinf(p) else p)
            accepted[e.id] = min(d, q)
            earned[e.id] = accepted[e.id] * (p - e.cost) if accepted[e.id] > 0 else 0.0
            continue
        scale = q / mix.target if mix.target > 0 else 0.0
        demand[e.id] = mix.expected_demand(curve) * scale
        accepted[e.id] = min(demand[e.id], q)
        finite = [x for x in mix.entries if not math.isinf(x.price)]
        weight = sum(x.probability for x in finite)
        price[e.id] = sum(x.probability * x.price for x in finite) / weight if weight > 0 else None
        earned[e.id] = planner.value(t, e, q)
    return demand, accepted, planned, price, earned
