"""Two-point randomized prices attaining the ironed objective."""

import math
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.core.demand import DemandModel
from src.core.objective import objective_array
from src.ironing.envelope import IronedObjective, envelope_value
from src.utils.errors import ValidationError


class MixtureEntry(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    price: float  # inf means the edge is closed for this draw
    probability: float
    throughput: float  # accepted mass when this price is drawn


class PriceMixture(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    entries: List[MixtureEntry]
    target: float

    def expected_throughput(self) -> float:
        return sum(e.probability * e.throughput for e in self.entries)

    def expected_demand(self, curve: DemandModel) -> float:
        return sum(e.probability * curve.evaluate(e.price) for e in self.entries if not math.isinf(e.price))

    def expected_objective(self, curve: DemandModel, env: IronedObjective) -> float:
        q = np.array([e.throughput for e in self.entries])
        g = env.scale * objective_array(curve, env.cost, env.objective, q)
        return float(sum(e.probability * v for e, v in zip(self.entries, g)))

    def expected_revenue(self, cost: float) -> float:
        """Platform money per step: accepted mass times margin, averaged over draws."""
        return sum(
            e.probability * e.throughput * (e.price - cost)
            for e in self.entries
            if e.throughput > 0 and not math.isinf(e.price)
        )


def _price_for(curve: DemandModel, q: float) -> float:
    if q <= 0.0:
        return math.inf
    return curve.inverse(q)


def price_mixture(env: IronedObjective, curve: DemandModel, q_bar: float) -> PriceMixture:
    """
    Prices attaining ĝ(q_bar): a single price when the envelope touches g at q_bar,
    otherwise the endpoint prices of the ironed interval mixed so that the
    expected throughput is q_bar.
    """
    top = env.top
    if not (0.0 < q_bar <= top * (1 + 1e-12) + 1e-12):
        raise ValidationError(f"target throughput {q_bar} outside (0, {top}]")
    q_bar = min(q_bar, top)

    if env.breakpoint_index(q_bar) is not None:
        return PriceMixture(entries=[MixtureEntry(price=_price_for(curve, q_bar), probability=1.0, throughput=q_bar)], target=q_bar)

    raw = env.scale * float(objective_array(curve, env.cost, env.objective, np.array([q_bar]))[0])
    price = _price_for(curve, q_bar)
    clears = abs(curve.evaluate(price) - q_bar) <= 1e-9
    if clears and raw >= envelope_value(env, q_bar) - 1e-9:
        return PriceMixture(entries=[MixtureEntry(price=price, probability=1.0, throughput=q_bar)], target=q_bar)

    j = env.segment_index(q_bar)
    lo, hi = float(env.bq[j]), float(env.bq[j + 1])
    lam = (hi - q_bar) / (hi - lo)
    entries = [
        MixtureEntry(price=_price_for(curve, lo), probability=lam, throughput=lo),
        MixtureEntry(price=_price_for(curve, hi), probability=1.0 - lam, throughput=hi),
    ]
    return PriceMixture(entries=[e for e in entries if e.probability > 0], target=q_bar)
