"""Instance files: graph + demand + objective, and the one-time normalization."""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, model_validator

from src.core.demand import DemandCurve, DemandModel, NormalizedDemand
from src.core.graph import CityGraph, Edge, validate_graph
from src.core.objective import ObjectiveKind
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)


class Instance(BaseModel):
    """
    A market on a city graph.

    Example JSON:
    {
        "nodes": ["A", "B"],
        "edges": [
            {"id": "AB", "from": "A", "to": "B", "travel_time": 2, "cost": 0.0},
            {"id": "BA", "from": "B", "to": "A", "travel_time": 1, "cost": 0.0}
        ],
        "demand": {
            "AB": {"kind": "linear", "intercept": 1.0, "slope": 1.0},
            "BA": [{"kind": "lognormal", "mu_log": 2.3, "sigma_log": 0.5, "volume": 0.8},
                   {"kind": "lognormal", "mu_log": 2.1, "sigma_log": 0.5, "volume": 0.4}]
        },
        "objective": {"kind": "revenue"},
        "drivers": 1.0
    }
    A list of curves is indexed by period (period_minutes each, wrapping around).
    """
    model_config = ConfigDict(frozen=True)

    nodes: List[str]
    edges: List[Edge]
    demand: Dict[str, Union[DemandCurve, List[DemandCurve]]]
    objective: ObjectiveKind = ObjectiveKind()
    drivers: float = Field(default=1.0, gt=0)
    period_minutes: int = Field(default=60, ge=1)
    step_minutes: int = Field(default=15, ge=1)
    initial_distribution: Optional[Dict[str, float]] = None
    in_transit: Optional[Dict[str, List[float]]] = None  # edge id -> mass by remaining steps (1..travel_time-1)
    normalized: bool = False
    virtual_nodes: List[str] = []  # chain nodes added by travel-time unification

    @model_validator(mode="after")
    def _check_demand_keys(self):
        edge_ids = {e.id for e in self.edges}
        missing = edge_ids - set(self.demand)
        extra = set(self.demand) - edge_ids
        if missing:
            raise ValueError(f"no demand for edges {sorted(missing)}")
        if extra:
            raise ValueError(f"demand for unknown edges {sorted(extra)}")
        for key, entry in self.demand.items():
            if isinstance(entry, list) and not entry:
                raise ValueError(f"empty period list for edge {key!r}")
        return self

    @property
    def graph(self) -> CityGraph:
        return CityGraph(nodes=self.nodes, edges=self.edges)

    @property
    def periods(self) -> int:
        return max((len(v) if isinstance(v, list) else 1) for v in self.demand.values())

    @property
    def is_dynamic(self) -> bool:
        return self.periods > 1

    def curve(self, edge_id: str, step: int = 1) -> DemandModel:
        """Demand curve of an edge at a 1-based step."""
        entry = self.demand[edge_id]
        if not isinstance(entry, list):
            return entry
        steps_per_period = max(1, self.period_minutes // self.step_minutes)
        period = ((step - 1) // steps_per_period) % len(entry)
        return entry[period]

    def period_of(self, step: int) -> int:
        steps_per_period = max(1, self.period_minutes // self.step_minutes)
        return ((step - 1) // steps_per_period) % self.periods

    def uniform_distribution(self) -> Dict[str, float]:
        return {v: 1.0 / len(self.nodes) for v in self.nodes}


def _normalize_curve(curve: DemandModel, drivers: float) -> NormalizedDemand:
    if isinstance(curve, NormalizedDemand):
        return curve
    return NormalizedDemand(base=curve, scale=drivers, level=1.0)


def normalize_instance(instance: Instance) -> Instance:
    """Divide demand by the driver total and saturate every curve at D(0|e) = 1."""
    if instance.normalized:
        return instance
    demand = {}
    for key, entry in instance.demand.items():
        if isinstance(entry, list):
            demand[key] = [_normalize_curve(c, instance.drivers) for c in entry]
        else:
            demand[key] = _normalize_curve(entry, instance.drivers)
    logger.info(f"Normalized {len(demand)} edges by driver supply {instance.drivers:g}")
    return instance.model_copy(update={"demand": demand, "normalized": True})


def check_instance(instance: Instance) -> Instance:
    report = validate_graph(instance.graph)
    if not report["valid"]:
        raise ValidationError("invalid graph: " + "; ".join(report["violations"]))
    return instance


def load_instance(path: Union[str, Path]) -> Instance:
    path = Path(path)
    try:
        instance = Instance.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, PydanticValidationError) as e:
        raise ValidationError(f"cannot load instance {path}: {e}") from e
    check_instance(instance)
    logger.info(f"Loaded instance {path.name}: {len(instance.nodes)} nodes, {len(instance.edges)} edges")
    return instance


def save_instance(instance: Instance, path: Union[str, Path]) -> None:
    payload = instance.model_dump(mode="json", by_alias=True, exclude_none=True)
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
