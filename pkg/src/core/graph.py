"""City graph: regions, directed edges with integer travel times and per-trip costs."""

from typing import List, TypedDict

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field


class Edge(BaseModel):
    """A directed origin-destination pair."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: str
    origin: str = Field(alias="from")
    destination: str = Field(alias="to")
    travel_time: int = 1  # steps
    cost: float = 0.0  # money per trip
    minutes: float | None = None  # benchmark pricing; defaults to travel_time * step_minutes

    def trip_minutes(self, step_minutes: int) -> float:
        return self.minutes if self.minutes is not None else float(self.travel_time * step_minutes)


class CityGraph(BaseModel):
    model_config = ConfigDict(frozen=True)

    nodes: List[str]
    edges: List[Edge]

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    def out_edges(self, node: str) -> List[Edge]:
        return [e for e in self.edges if e.origin == node]

    def in_edges(self, node: str) -> List[Edge]:
        return [e for e in self.edges if e.destination == node]

    def to_networkx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.nodes)
        for e in self.edges:
            g.add_edge(e.origin, e.destination, key=e.id)
        return g


class GraphReport(TypedDict):
    """Outcome of validate_graph; `violations` is empty iff the graph is valid."""
    valid: bool
    violations: List[str]


def validate_graph(graph: CityGraph) -> GraphReport:
    violations: List[str] = []
    node_set = set(graph.nodes)

    if not graph.nodes:
        violations.append("graph has no nodes")
    if len(node_set) != len(graph.nodes):
        violations.append("duplicate node ids")

    seen = set()
    for e in graph.edges:
        if e.id in seen:
            violations.append(f"duplicate edge id {e.id!r}")
        seen.add(e.id)
        if e.origin not in node_set or e.destination not in node_set:
            violations.append(f"edge {e.id!r} references an unknown node")
        if e.travel_time < 1:
            violations.append(f"edge {e.id!r} has travel_time {e.travel_time} < 1")
        if e.cost < 0:
            violations.append(f"edge {e.id!r} has negative cost {e.cost}")

    if graph.nodes and not any("unknown node" in v for v in violations):
        if not nx.is_strongly_connected(graph.to_networkx()):
            violations.append("not strongly connected")

    return {"valid": not violations, "violations": violations}
