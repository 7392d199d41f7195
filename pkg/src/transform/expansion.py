"""
Travel-time unification.

An edge that takes k > 1 steps becomes a chain of k unit-time edges through k-1
virtual nodes. Every chain edge keeps the original demand curve, carries cost
c/k and contributes g/k to the objective, so a constant flow q along the chain
is worth exactly g(q). A virtual node has no other edges, which forces the
drivers sitting on it to continue along the chain.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from src.core.graph import Edge
from src.core.instance import Instance
from src.utils.errors import ValidationError

if TYPE_CHECKING:
    from src.solver.plan import FlowPlan

logger = logging.getLogger(__name__)


class ExpandedGraph(BaseModel):
    """Bookkeeping between an original instance and its unified copy."""
    model_config = ConfigDict(frozen=True)

    chains: Dict[str, List[str]]  # original edge -> chain edge ids in travel order
    origin_edge: Dict[str, str]  # chain edge -> original edge
    scale: Dict[str, float]  # chain edge -> 1 / travel_time
    virtual: Dict[str, Tuple[str, int]]  # virtual node -> (original edge, steps already travelled)
    real_nodes: List[str]
    travel_time: Dict[str, int]
    lag: Dict[str, int]  # chain edge -> steps since its cohort launched

    def virtual_node(self, edge_id: str, remaining: int) -> str:
        """Virtual node holding drivers with `remaining` steps left on edge_id."""
        k = self.travel_time[edge_id]
        return _virtual_id(edge_id, k - remaining)


def _virtual_id(edge_id: str, position: int) -> str:
    return f"{edge_id}#v{position}"


def _chain_id(edge_id: str, position: int) -> str:
    return f"{edge_id}#{position}"


def expand(instance: Instance) -> Tuple[Instance, ExpandedGraph]:
    """Unit-travel-time instance equivalent to `instance`, plus the chain mapping."""
    nodes = list(instance.nodes)
    edges: List[Edge] = []
    demand = {}
    chains, origin_edge, scale, virtual, travel, lag = {}, {}, {}, {}, {}, {}

    for e in instance.edges:
        k = e.travel_time
        travel[e.id] = k
        if k == 1:
            chain = [e]
        else:
            stops = [e.origin] + [_virtual_id(e.id, i) for i in range(1, k)] + [e.destination]
            for i in range(1, k):
                nodes.append(stops[i])
                virtual[stops[i]] = (e.id, i)
            minutes = None if e.minutes is None else e.minutes / k
            chain = [
                Edge(id=_chain_id(e.id, i), origin=stops[i], destination=stops[i + 1],
                     travel_time=1, cost=e.cost / k, minutes=minutes)
                for i in range(k)
            ]
        chains[e.id] = [c.id for c in chain]
        for i, c in enumerate(chain):
            edges.append(c)
            lag[c.id] = i
            demand[c.id] = instance.demand[e.id]
            origin_edge[c.id] = e.id
            scale[c.id] = 1.0 / k

    mapping = ExpandedGraph(
        chains=chains,
        origin_edge=origin_edge,
        scale=scale,
        virtual=virtual,
        real_nodes=list(instance.nodes),
        travel_time=travel,
        lag=lag,
    )
    initial = None
    if instance.initial_distribution is not None:
        initial = expand_distribution(instance.initial_distribution, instance.in_transit, mapping)

    expanded = instance.model_copy(update={
        "nodes": nodes,
        "edges": edges,
        "demand": demand,
        "initial_distribution": initial,
        "in_transit": None,
        "virtual_nodes": list(virtual),
    })
    if virtual:
        logger.info(f"Unified travel times: {len(instance.edges)} edges -> {len(edges)}, {len(virtual)} virtual nodes")
    return expanded, mapping


def expand_distribution(
    w1: Dict[str, float],
    in_transit: Optional[Dict[str, List[float]]],
    mapping: ExpandedGraph,
) -> Dict[str, float]:
    """Initial availability on the unified graph; in-transit mass lands on virtual nodes."""
    unknown = set(w1) - set(mapping.real_nodes)
    if unknown:
        raise ValidationError(f"initial distribution names unknown regions {sorted(unknown)}")
    dist = {v: float(w1.get(v, 0.0)) for v in mapping.real_nodes}
    dist.update({v: 0.0 for v in mapping.virtual})
    for edge_id, masses in (in_transit or {}).items():
        if edge_id not in mapping.travel_time:
            raise ValidationError(f"in-transit mass on unknown edge {edge_id!r}")
        k = mapping.travel_time[edge_id]
        if len(masses) > k - 1:
            raise ValidationError(f"edge {edge_id!r} takes {k} steps; got {len(masses)} in-transit entries")
        for r, mass in enumerate(masses, start=1):
            dist[mapping.virtual_node(edge_id, r)] += mass
    return dist


def contract_solution(
    plan: FlowPlan,
    mapping: ExpandedGraph,
    expanded: Instance,
    tol: float = 1e-7,
) -> FlowPlan:
    """Map a unified-graph plan back to original edges, rejecting infeasible input."""
    from src.solver.plan import primal_residuals

    residuals = primal_residuals(expanded.graph, plan, virtual_nodes=mapping.virtual)
    worst = max(residuals.values())
    if worst > tol:
        raise ValidationError(f"cannot contract an infeasible plan: {residuals}")

    q_out, w_out, transit_out = [], [], []
    for q, w in zip(plan.q, plan.w):
        q_out.append({e: q.get(chain[0], 0.0) for e, chain in mapping.chains.items()})
        w_out.append({v: w.get(v, 0.0) for v in mapping.real_nodes})
        transit_out.append({
            e: [w.get(mapping.virtual_node(e, r), 0.0) for r in range(1, k)]
            for e, k in mapping.travel_time.items() if k > 1
        })
    return plan.model_copy(update={"q": q_out, "w": w_out, "in_transit": transit_out, "unified": False})


def expand_plan(plan: FlowPlan, mapping: ExpandedGraph) -> FlowPlan:
    """
    Inverse of contract_solution. A static plan without in-transit entries puts
    q(e) on each virtual node of the chain (steady state).
    """
    if plan.unified:
        return plan
    q_out, w_out = [], []
    for t in range(plan.horizon):
        q, w = plan.q[t], plan.w[t]
        transit = plan.in_transit[t] if plan.in_transit else {}
        qx, wx = {}, {v: w.get(v, 0.0) for v in mapping.real_nodes}
        for e, chain in mapping.chains.items():
            k = mapping.travel_time[e]
            masses = transit.get(e) or [q.get(e, 0.0)] * (k - 1)
            for r in range(1, k):
                wx[mapping.virtual_node(e, r)] = masses[r - 1]
            if plan.mode == "static":
                qx.update({c: q.get(e, 0.0) for c in chain})
            else:
                # drivers leaving virtual node i at step t are the ones that entered the chain earlier
                qx[chain[0]] = q.get(e, 0.0)
                for i in range(1, k):
                    qx[chain[i]] = wx[_virtual_id(e, i)]
        q_out.append(qx)
        w_out.append(wx)
    return plan.model_copy(update={"q": q_out, "w": w_out, "in_transit": [], "unified": True})
