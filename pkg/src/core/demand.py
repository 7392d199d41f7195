"""
Demand curves D(p|e): mass of requests on an edge whose private value is at least p.

Three families share one evaluation interface:
1. LinearDemand    - D(p) = min(volume, max(0, intercept - slope * p)), the test family
2. StepDemand      - finitely many value atoms with masses
3. LognormalDemand - volume times the lognormal survival function

NormalizedDemand wraps any of them after instance normalization so that
D(0|e) = 1: missing mass becomes zero-value (empty relocation) requests and excess
mass is cut from the low-value end.
"""

import math
from typing import Annotated, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate
from scipy.stats import lognorm

from src.utils.errors import ValidationError

_Q_TOL = 1e-12


class DemandModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    def top(self) -> float:
        """Maximum throughput D(0)."""
        raise NotImplementedError

    def demand_array(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse_array(self, q: np.ndarray) -> np.ndarray:
        """Largest price clearing throughput q; q is assumed inside (0, top]."""
        raise NotImplementedError

    def partial_value_array(self, q: np.ndarray) -> np.ndarray:
        """Integral of D^-1 over [0, q]: total value of the q highest-value requests."""
        raise NotImplementedError

    def quantile_points(self) -> List[float]:
        """Throughputs where D^-1 jumps (atom boundaries)."""
        return []

    def evaluate(self, p: float) -> float:
        if p < 0:
            raise ValidationError(f"price must be non-negative, got {p}")
        return float(self.demand_array(np.array([p], dtype=float))[0])

    def inverse(self, q: float) -> float:
        top = self.top()
        if not (0.0 < q <= top * (1 + _Q_TOL) + _Q_TOL):
            raise ValidationError(f"throughput {q} outside (0, {top}]")
        return float(self.inverse_array(np.array([min(q, top)], dtype=float))[0])

    def partial_value(self, q: float) -> float:
        top = self.top()
        if not (0.0 <= q <= top * (1 + _Q_TOL) + _Q_TOL):
            raise ValidationError(f"throughput {q} outside [0, {top}]")
        if q == 0.0:
            return 0.0
        return float(self.partial_value_array(np.array([min(q, top)], dtype=float))[0])


class LinearDemand(DemandModel):
    kind: Literal["linear"] = "linear"
    intercept: float = Field(default=1.0, gt=0)
    slope: float = Field(default=1.0, gt=0)
    volume: float | None = Field(default=None, gt=0)

    def top(self) -> float:
        return self.intercept if self.volume is None else min(self.volume, self.intercept)

    def demand_array(self, p):
        d = np.maximum(0.0, self.intercept - self.slope * np.asarray(p, dtype=float))
        return np.minimum(d, self.top())

    def inverse_array(self, q):
        return (self.intercept - np.asarray(q, dtype=float)) / self.slope

    def partial_value_array(self, q):
        q = np.asarray(q, dtype=float)
        return (self.intercept * q - 0.5 * q * q) / self.slope


class StepDemand(DemandModel):
    kind: Literal["step"] = "step"
    atoms: List[Tuple[float, float]]  # (value, mass)

    @model_validator(mode="after")
    def _check_atoms(self):
        if not self.atoms:
            raise ValueError("step demand needs at least one atom")
        for value, mass in self.atoms:
            if value < 0 or mass <= 0:
                raise ValueError(f"invalid atom ({value}, {mass})")
        return self

    def _sorted(self) -> Tuple[np.ndarray, np.ndarray]:
        ordered = sorted(self.atoms, key=lambda a: -a[0])
        values = np.array([a[0] for a in ordered], dtype=float)
        masses = np.array([a[1] for a in ordered], dtype=float)
        return values, masses

    def top(self) -> float:
        return float(sum(m for _, m in self.atoms))

    def quantile_points(self) -> List[float]:
        _, masses = self._sorted()
        return [float(c) for c in np.cumsum(masses)]

    def demand_array(self, p):
        values, masses = self._sorted()
        p = np.asarray(p, dtype=float)
        return (masses[None, :] * (values[None, :] >= p[:, None])).sum(axis=1)

    def inverse_array(self, q):
        values, masses = self._sorted()
        cum = np.cumsum(masses)
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(cum, q - _Q_TOL * np.maximum(1.0, cum[-1]), side="left")
        idx = np.clip(idx, 0, len(values) - 1)
        return values[idx]

    def partial_value_array(self, q):
        values, masses = self._sorted()
        cum_before = np.concatenate([[0.0], np.cumsum(masses)[:-1]])
        q = np.asarray(q, dtype=float)
        taken = np.clip(q[:, None] - cum_before[None, :], 0.0, masses[None, :])
        return (taken * values[None, :]).sum(axis=1)


class LognormalDemand(DemandModel):
    kind: Literal["lognormal"] = "lognormal"
    mu_log: float
    sigma_log: float = Field(gt=0)
    volume: float = Field(default=1.0, gt=0)

    def _dist(self):
        return lognorm(s=self.sigma_log, scale=math.exp(self.mu_log))

    def top(self) -> float:
        return self.volume

    def demand_array(self, p):
        return self.volume * self._dist().sf(np.asarray(p, dtype=float))

    def inverse_array(self, q):
        return self._dist().isf(np.asarray(q, dtype=float) / self.volume)

    def partial_value_array(self, q):
        dist = self._dist()
        prices = self.inverse_array(q)
        out = np.empty_like(prices)
        for i, p in enumerate(prices):
            if not np.isfinite(p):
                out[i] = 0.0
                continue
            tail, _ = integrate.quad(lambda x: x * dist.pdf(x), p, np.inf, epsabs=1e-8, epsrel=1e-8)
            out[i] = self.volume * tail
        return out


RawDemand = Annotated[Union[LinearDemand, StepDemand, LognormalDemand], Field(discriminator="kind")]


class NormalizedDemand(DemandModel):
    """Base curve divided by the driver supply and saturated at D(0) = level."""
    kind: Literal["normalized"] = "normalized"
    base: RawDemand
    scale: float = Field(default=1.0, gt=0)
    level: float = Field(default=1.0, gt=0)

    def served_top(self) -> float:
        """Throughput reachable with real (positive-value) passengers."""
        return min(self.level, self.base.top() / self.scale)

    def top(self) -> float:
        return self.level

    def quantile_points(self) -> List[float]:
        pts = [min(self.level, x / self.scale) for x in self.base.quantile_points()]
        return sorted(set(pts + [self.served_top()]))

    def demand_array(self, p):
        p = np.asarray(p, dtype=float)
        d = np.minimum(self.level, self.base.demand_array(p) / self.scale)
        return np.where(p <= 0.0, self.level, d)

    def inverse_array(self, q):
        q = np.asarray(q, dtype=float)
        real = np.minimum(q, self.served_top()) * self.scale
        prices = self.base.inverse_array(np.maximum(real, 1e-300))
        return np.where(q <= self.served_top() * (1 + _Q_TOL), prices, 0.0)

    def partial_value_array(self, q):
        q = np.asarray(q, dtype=float)
        real = np.minimum(q, self.served_top()) * self.scale
        return self.base.partial_value_array(real) / self.scale


DemandCurve = Annotated[
    Union[LinearDemand, StepDemand, LognormalDemand, NormalizedDemand],
    Field(discriminator="kind"),
]


def eval_demand(curve: DemandModel, p: float) -> float:
    """D(p|e); rejects negative prices."""
    return curve.evaluate(p)


def inverse_demand(curve: DemandModel, q: float) -> float:
    """Maximum price inducing throughput q, for q in (0, D(0)]."""
    return curve.inverse(q)
