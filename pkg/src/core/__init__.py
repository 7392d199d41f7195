"""Domain types and primitive evaluations."""

from src.core.demand import (
    DemandCurve,
    DemandModel,
    LinearDemand,
    LognormalDemand,
    NormalizedDemand,
    StepDemand,
    eval_demand,
    inverse_demand,
)
from src.core.graph import CityGraph, Edge, GraphReport, validate_graph
from src.core.instance import (
    Instance,
    check_instance,
    load_instance,
    normalize_instance,
    save_instance,
)
from src.core.objective import (
    REVENUE,
    WELFARE,
    ObjectiveKind,
    objective_array,
    price_objective,
    raw_edge_objective,
)

__all__ = [
    "DemandCurve",
    "DemandModel",
    "LinearDemand",
    "LognormalDemand",
    "NormalizedDemand",
    "StepDemand",
    "eval_demand",
    "inverse_demand",
    "CityGraph",
    "Edge",
    "GraphReport",
    "validate_graph",
    "Instance",
    "check_instance",
    "load_instance",
    "normalize_instance",
    "save_instance",
    "REVENUE",
    "WELFARE",
    "ObjectiveKind",
    "objective_array",
    "price_objective",
    "raw_edge_objective",
]
