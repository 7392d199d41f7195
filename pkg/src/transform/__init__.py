"""Travel-time unification: chains of virtual nodes and the plan bijection."""

from src.transform.expansion import (
    ExpandedGraph,
    contract_solution,
    expand,
    expand_distribution,
    expand_plan,
)

__all__ = ["ExpandedGraph", "contract_solution", "expand", "expand_distribution", "expand_plan"]
