"""Per-edge objectives g(q|e) at the deterministic price D^-1(q)."""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.demand import DemandModel
from src.utils.errors import ValidationError


class ObjectiveKind(BaseModel):
    """REVENUE, WELFARE, or MIX(theta) = theta * REVENUE + (1 - theta) * WELFARE."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["revenue", "welfare", "mix"] = "revenue"
    theta: float = Field(default=1.0, ge=0.0, le=1.0)

    @property
    def revenue_weight(self) -> float:
        if self.kind == "revenue":
            return 1.0
        if self.kind == "welfare":
            return 0.0
        return self.theta


REVENUE = ObjectiveKind(kind="revenue")
WELFARE = ObjectiveKind(kind="welfare", theta=0.0)


def objective_array(curve: DemandModel, cost: float, kind: ObjectiveKind, q: np.ndarray) -> np.ndarray:
    """Vectorized g(q); q must lie in [0, D(0)]. g(0) = 0."""
    q = np.asarray(q, dtype=float)
    out = np.zeros_like(q)
    positive = q > 0
    if not positive.any():
        return out
    qp = q[positive]
    theta = kind.revenue_weight
    value = np.zeros_like(qp)
    if theta > 0:
        value += theta * (curve.inverse_array(qp) - cost) * qp
    if theta < 1:
        value += (1 - theta) * (curve.partial_value_array(qp) - cost * qp)
    out[positive] = value
    return out


def raw_edge_objective(curve: DemandModel, cost: float, kind: ObjectiveKind, q: float) -> float:
    top = curve.top()
    if not (0.0 <= q <= top * (1 + 1e-12) + 1e-12):
        raise ValidationError(f"throughput {q} outside [0, {top}]")
    return float(objective_array(curve, cost, kind, np.array([min(q, top)]))[0])


def price_objective(curve: DemandModel, cost: float, kind: ObjectiveKind, price: float) -> float:
    """Objective of quoting one deterministic price and serving all induced demand."""
    if np.isinf(price):
        return 0.0
    d = curve.evaluate(price)
    if d <= 0:
        return 0.0
    theta = kind.revenue_weight
    revenue = (price - cost) * d
    welfare = curve.partial_value(d) - cost * d
    return theta * revenue + (1 - theta) * welfare
