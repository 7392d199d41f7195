"""
Static and dynamic dispatch programs as bounded linear programs.

Every ironed envelope is piecewise linear, so each edge contributes one bounded
column per segment (marginal value as cost, segment length as upper bound).
Rows:
  static   mass sum_v w(v) = 1, capacity out(v) - w(v) <= 0, balance out(v) - in(v) = 0
  dynamic  capacity per (step, node), transition w_{t+1} - w_t + out_t - in_t = 0,
           plus a budget row (total_accumulated) or per-step supply rows (soft)
Capacity rows at virtual chain nodes are equalities: drivers mid-trip keep moving.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.graph import CityGraph, Edge
from src.core.instance import Instance
from src.ironing.envelope import IronedObjective, coarsen, iron, scaled
from src.solver.plan import (
    PER_STEP,
    DualCertificate,
    FlowPlan,
    SolveResult,
    SupplyConstraint,
    primal_residuals,
)
from src.solver.pwl import pwl_discretize
from src.solver.simplex import solve_lp
from src.utils.config import get_settings
from src.utils.errors import SolveError, ValidationError

logger = logging.getLogger(__name__)

Envelopes = Dict[str, List[IronedObjective]]  # edge id -> one envelope per demand period


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    grid_size: int = Field(default=1000, ge=2)
    max_segments: int = Field(default=1000, ge=1)
    dynamic_max_segments: int = Field(default=40, ge=1)  # per edge and step
    feasibility_tol: float = Field(default=1e-7, gt=0)
    stationarity_tol: float = Field(default=1e-5, gt=0)
    max_pivots: int = Field(default=100_000, ge=1)

    @classmethod
    def from_settings(cls, **overrides) -> "SolverConfig":
        s = get_settings()
        values = dict(
            grid_size=s.grid_size,
            max_segments=s.max_segments,
            feasibility_tol=s.feasibility_tol,
            stationarity_tol=s.stationarity_tol,
            max_pivots=s.max_pivots,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class LinearProgram:
    mode: str
    horizon: int
    nodes: List[str]
    edges: List[Tuple[str, str, str]]  # (id, origin, destination)
    virtual: FrozenSet[str]
    envelopes: List[Dict[str, IronedObjective]]  # per step, already coarsened
    c: np.ndarray
    A: np.ndarray
    senses: List[str]
    b: np.ndarray
    upper: np.ndarray
    segment_cols: Dict[Tuple[int, str], List[int]]
    w_cols: Dict[Tuple[int, str], int]
    w_fixed: Dict[str, float]  # step-1 availability that is data, not a variable
    rows: Dict[Tuple[str, int, str], int]  # (family, step, node) -> row; family in mass|cap|bal|budget|supply
    supply: SupplyConstraint = PER_STEP
    supply_cols: Dict[int, List[Tuple[int, float]]] = field(default_factory=dict)  # step -> (col, cost)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.A.shape


class _Builder:
    def __init__(self):
        self.cost: List[float] = []
        self.upper: List[float] = []
        self.entries: List[Tuple[int, int, float]] = []
        self.senses: List[str] = []
        self.rhs: List[float] = []
        self.rows: Dict[Tuple[str, int, str], int] = {}

    def column(self, cost: float, upper: float) -> int:
        self.cost.append(cost)
        self.upper.append(upper)
        return len(self.cost) - 1

    def row(self, key: Tuple[str, int, str], sense: str, rhs: float = 0.0) -> int:
        self.rows[key] = len(self.senses)
        self.senses.append(sense)
        self.rhs.append(rhs)
        return self.rows[key]

    def put(self, row_key, col: int, coef: float) -> None:
        if row_key in self.rows:
            self.entries.append((self.rows[row_key], col, coef))

    def matrix(self) -> np.ndarray:
        A = np.zeros((len(self.senses), len(self.cost)))
        for i, j, v in self.entries:
            A[i, j] += v
        return A


def _edge_columns(builder: _Builder, step: int, edge, env: IronedObjective, max_segments: Optional[int]) -> List[int]:
    cols = []
    for seg in pwl_discretize(env, max_segments):
        j = builder.column(seg.marginal, seg.length)
        builder.put(("cap", step, edge.origin), j, 1.0)
        builder.put(("bal", step, edge.origin), j, 1.0)
        builder.put(("bal", step, edge.destination), j, -1.0)
        cols.append(j)
    return cols


def build_static_program(instance: Instance, envelopes: Envelopes, max_segments: Optional[int] = None, period: int = 0) -> LinearProgram:
    """Stationary program over a unified instance (all travel times 1)."""
    if any(e.travel_time != 1 for e in instance.edges):
        raise ValidationError("build_static_program needs a travel-time-unified instance; call expand() first")
    virtual = frozenset(instance.virtual_nodes)
    reference = next(v for v in instance.nodes if v not in virtual)
    bld = _Builder()
    bld.row(("mass", 1, ""), "=", 1.0)
    for v in instance.nodes:
        bld.row(("cap", 1, v), "=" if v in virtual else "<=")
    for v in instance.nodes:
        if v != reference:
            bld.row(("bal", 1, v), "=")

    step_envs, segment_cols = {}, {}
    for e in instance.edges:
        env = envelopes[e.id][period]
        if max_segments is not None:
            env = coarsen(env, max_segments)
        step_envs[e.id] = env
        segment_cols[(1, e.id)] = _edge_columns(bld, 1, e, env, None)
    w_cols = {}
    for v in instance.nodes:
        j = bld.column(0.0, np.inf)
        bld.put(("mass", 1, ""), j, 1.0)
        bld.put(("cap", 1, v), j, -1.0)
        w_cols[(1, v)] = j

    program = LinearProgram(
        mode="static", horizon=1, nodes=list(instance.nodes),
        edges=[(e.id, e.origin, e.destination) for e in instance.edges],
        virtual=virtual, envelopes=[step_envs],
        c=np.asarray(bld.cost), A=bld.matrix(), senses=bld.senses, b=np.asarray(bld.rhs),
        upper=np.asarray(bld.upper), segment_cols=segment_cols, w_cols=w_cols, w_fixed={}, rows=bld.rows,
    )
    logger.info(f"Static program: {program.shape[0]} rows x {program.shape[1]} columns")
    return program


def build_dynamic_program(
    instance: Instance,
    envelopes: Envelopes,
    T: int,
    w1: Dict[str, float],
    supply: SupplyConstraint = PER_STEP,
    max_segments: Optional[int] = None,
    lags: Optional[Dict[str, int]] = None,
) -> LinearProgram:
    """
    Finite-horizon program over a unified instance. A chain edge `lags[e]` steps
    into its trip is valued with the demand period its cohort launched in, so at
    step t it uses instance.period_of(t - lags[e]).
    """
    lags = lags or {}
    if T < 1:
        raise ValidationError(f"horizon must be at least 1, got {T}")
    if any(e.travel_time != 1 for e in instance.edges):
        raise ValidationError("build_dynamic_program needs a travel-time-unified instance; call expand() first")
    unknown = set(w1) - set(instance.nodes)
    if unknown:
        raise ValidationError(f"initial distribution names unknown nodes {sorted(unknown)}")
    if any(m < 0 for m in w1.values()):
        raise ValidationError("initial distribution must be non-negative")
    if supply.kind == "per_step" and abs(sum(w1.values()) - 1.0) > 1e-8:
        raise ValidationError(f"initial distribution sums to {sum(w1.values()):.10g}, expected 1")

    virtual = frozenset(instance.virtual_nodes)
    free_real = supply.kind != "per_step"

    def is_free(step: int, v: str) -> bool:
        return step > 1 or (free_real and v not in virtual)

    bld = _Builder()
    w_fixed = {v: float(w1.get(v, 0.0)) for v in instance.nodes if not is_free(1, v)}
    for t in range(1, T + 1):
        for v in instance.nodes:
            rhs = w_fixed[v] if not is_free(t, v) else 0.0
            bld.row(("cap", t, v), "=" if v in virtual else "<=", rhs)
    for t in range(1, T):
        for v in instance.nodes:
            if free_real and v not in virtual:
                continue
            rhs = w_fixed[v] if not is_free(t, v) else 0.0
            bld.row(("bal", t, v), "=", rhs)
    fixed_mass = sum(w_fixed.values())
    if supply.kind == "total_accumulated":
        budget = supply.budget if supply.budget is not None else float(T)
        bld.row(("budget", 0, ""), "=", budget - fixed_mass)
    elif supply.kind == "soft":
        for t in range(1, T + 1):
            bld.row(("supply", t, ""), "=", -fixed_mass if t == 1 else 0.0)

    step_envs: List[Dict[str, IronedObjective]] = []
    segment_cols, w_cols, supply_cols = {}, {}, {}
    for t in range(1, T + 1):
        envs = {}
        for e in instance.edges:
            env = envelopes[e.id][instance.period_of(t - lags.get(e.id, 0)) % len(envelopes[e.id])]
            if max_segments is not None:
                env = coarsen(env, max_segments)
            envs[e.id] = env
            cols = _edge_columns(bld, t, e, env, None)
            segment_cols[(t, e.id)] = cols
        step_envs.append(envs)
        for v in instance.nodes:
            if not is_free(t, v):
                continue
            j = bld.column(0.0, np.inf)
            bld.put(("cap", t, v), j, -1.0)
            bld.put(("bal", t - 1, v), j, 1.0)
            bld.put(("bal", t, v), j, -1.0)
            bld.put(("budget", 0, ""), j, 1.0)
            bld.put(("supply", t, ""), j, 1.0)
            w_cols[(t, v)] = j
        if supply.kind == "soft":
            supply_cols[t] = []
            for width, cost in supply.marginal_costs:
                j = bld.column(-cost, np.inf if width is None else width)
                bld.put(("supply", t, ""), j, -1.0)
                supply_cols[t].append((j, cost))

    program = LinearProgram(
        mode="dynamic", horizon=T, nodes=list(instance.nodes),
        edges=[(e.id, e.origin, e.destination) for e in instance.edges],
        virtual=virtual, envelopes=step_envs,
        c=np.asarray(bld.cost), A=bld.matrix(), senses=bld.senses, b=np.asarray(bld.rhs),
        upper=np.asarray(bld.upper), segment_cols=segment_cols, w_cols=w_cols, w_fixed=w_fixed,
        rows=bld.rows, supply=supply, supply_cols=supply_cols,
    )
    logger.info(f"Dynamic program ({supply.kind}, T={T}): {program.shape[0]} rows x {program.shape[1]} columns")
    return program


def build_envelopes(instance: Instance, config: SolverConfig, mapping=None) -> Envelopes:
    """
    Iron every (edge, period) curve of the original instance once; chain edges of
    a unified instance share their original edge's envelope scaled by 1/travel_time.
    """
    envs: Envelopes = {}
    for e in instance.edges:
        entry = instance.demand[e.id]
        curves = entry if isinstance(entry, list) else [entry]
        base = [iron(c, e.cost, instance.objective, config.grid_size) for c in curves]
        chain = mapping.chains[e.id] if mapping is not None else [e.id]
        for cid in chain:
            factor = mapping.scale[cid] if mapping is not None else 1.0
            envs[cid] = base if factor == 1.0 else [scaled(env, factor) for env in base]
    return envs


def _dual_violation(lp, upper: np.ndarray, tol: float) -> float:
    x, d = lp.x, lp.reduced_costs
    at_lower = x <= tol
    at_upper = np.isfinite(upper) & (upper - x <= tol)
    viol = np.abs(d)
    viol = np.where(at_lower, np.maximum(d, 0.0), viol)
    viol = np.where(at_upper, np.maximum(-d, 0.0), viol)
    viol = np.where(at_lower & at_upper, 0.0, viol)
    return float(viol.max(initial=0.0))


def solve(program: LinearProgram, config: Optional[SolverConfig] = None) -> Tuple[FlowPlan, DualCertificate, SolveResult]:
    """Solve a built program; the certified flag requires LP optimality within the configured tolerances."""
    config = config or SolverConfig.from_settings()
    lp = solve_lp(program.c, program.A, program.senses, program.b, program.upper, max_pivots=config.max_pivots)
    if lp.status in ("infeasible", "unbounded"):
        raise SolveError(f"{program.mode} program is {lp.status}; check the supply constraint and initial distribution")

    x, y = lp.x, lp.duals
    q, w = [], []
    for t in range(1, program.horizon + 1):
        q.append({eid: float(x[program.segment_cols[(t, eid)]].sum()) for eid, _, _ in program.edges})
        w.append({
            v: float(x[program.w_cols[(t, v)]]) if (t, v) in program.w_cols else program.w_fixed.get(v, 0.0)
            for v in program.nodes
        })
    value = sum(
        float(env.value_array(np.array([q[t][eid]]))[0])
        for t, envs in enumerate(program.envelopes) for eid, env in envs.items()
    )
    value -= sum(float(x[j]) * cost for cols in program.supply_cols.values() for j, cost in cols)

    plan = FlowPlan(mode=program.mode, horizon=program.horizon, q=q, w=w, objective_value=value, supply=program.supply)
    cert = _certificate(program, y)

    graph = CityGraph(nodes=program.nodes, edges=[Edge(id=i, origin=s, destination=d) for i, s, d in program.edges])
    tops = {eid: max(envs[eid].top for envs in program.envelopes) for eid, _, _ in program.edges}
    residuals = primal_residuals(graph, plan, virtual_nodes=program.virtual, tops=tops)
    residuals["lp_rows"] = lp.row_residual
    residuals["bounds"] = float(np.maximum(-x, x - program.upper).max(initial=0.0))
    residuals["dual"] = _dual_violation(lp, program.upper, config.feasibility_tol)
    primal = max(v for k, v in residuals.items() if k != "dual")
    certified = lp.status == "optimal" and primal <= config.feasibility_tol and residuals["dual"] <= config.stationarity_tol

    result = SolveResult(status=lp.status, certified=certified, pivots=lp.pivots, residuals=residuals)
    if certified:
        logger.info(f"Solved {program.mode} program: objective {value:.8g}, {lp.pivots} iterations")
    else:
        logger.warning(f"{program.mode} solve not certified: status {lp.status}, residuals {residuals}")
    return plan, cert, result


def _certificate(program: LinearProgram, y: np.ndarray) -> DualCertificate:
    def dual(key) -> float:
        i = program.rows.get(key)
        return float(y[i]) if i is not None else 0.0

    capacity, mu, lam = [], [], []
    for t in range(1, program.horizon + 1):
        capacity.append({v: dual(("cap", t, v)) for v in program.nodes})
        mu.append({v: dual(("bal", t, v)) for v in program.nodes})
        if program.mode == "static":
            lam.append(dual(("mass", 1, "")))
        elif program.supply.kind == "total_accumulated":
            lam.append(dual(("budget", 0, "")))
        elif program.supply.kind == "soft":
            lam.append(dual(("supply", t, "")))
        else:
            real = [v for v in program.nodes if v not in program.virtual]
            lam.append(max(capacity[-1][v] + mu[-1][v] for v in real))
    return DualCertificate(mode=program.mode, lam=lam, mu=mu, capacity=capacity, supply=program.supply)
