"""
Demand and price-rate estimation from filtered orders.

1. fit_time_price  - OLS slope of price on duration: the per-minute rate alpha
2. estimate_demand - lognormal MLE on the log-prices of one (edge, period) cell
3. estimate_instance - every edge (and hour), travel times, the supply normalizer
Observed prices stand in for passenger values, as accepted requests are all
the logs contain.
"""

import logging
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from src.core.demand import LognormalDemand
from src.core.graph import Edge
from src.core.instance import Instance
from src.ingestion.filtering import compute_durations, filter_abnormal
from src.ingestion.loader import OrderRecord
from src.utils.errors import EstimationError

logger = logging.getLogger(__name__)

MIN_CELL = 10
MIN_VOLUME = 1e-9  # hours without a single request still get a curve


class TimePriceFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float  # money per minute
    intercept: float
    r_squared: float
    stderr: float
    n: int


class DemandEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu_log: float
    sigma_log: float
    volume: float  # requests per step
    n: int
    fallback: bool = False  # parameters borrowed from the all-hours aggregate

    def curve(self) -> LognormalDemand:
        return LognormalDemand(mu_log=self.mu_log, sigma_log=self.sigma_log, volume=max(self.volume, MIN_VOLUME))


class EdgeEstimate(BaseModel):
    origin: str
    destination: str
    minutes: float  # median duration
    travel_time: int  # steps
    aggregate: DemandEstimate
    hourly: List[DemandEstimate] = []


class EstimationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    step_minutes: int = Field(default=15, ge=1)
    lower_quantile: float = 0.05
    upper_quantile: float = 0.95
    min_records: int = Field(default=MIN_CELL, ge=2)
    hourly: bool = False
    weekdays_only: bool = True  # applies to hourly cells
    supply: Optional[float] = Field(default=None, gt=0, description="Drivers per step in request units; estimated from busy time when absent")


class EstimationResult(BaseModel):
    alpha: float
    fit: TimePriceFit
    filtering: Optional[dict] = None  # FilterReport
    drivers: float
    step_minutes: int
    edges: Dict[str, EdgeEstimate]

    def to_instance(self) -> Instance:
        nodes = sorted({e.origin for e in self.edges.values()} | {e.destination for e in self.edges.values()})
        edges, demand = [], {}
        for edge_id, est in self.edges.items():
            edges.append(Edge(id=edge_id, origin=est.origin, destination=est.destination,
                              travel_time=est.travel_time, minutes=est.minutes))
            demand[edge_id] = [h.curve() for h in est.hourly] if est.hourly else est.aggregate.curve()
        return Instance(nodes=nodes, edges=edges, demand=demand, drivers=self.drivers,
                        period_minutes=60, step_minutes=self.step_minutes)


def fit_time_price(frame: pd.DataFrame) -> TimePriceFit:
    """Least-squares price = alpha * minutes + intercept over trips with a duration."""
    measured = frame.dropna(subset=["duration"])
    x = measured["duration"].to_numpy(dtype=float)
    y = measured["price"].to_numpy(dtype=float)
    if x.size < 2 or np.ptp(x) == 0.0:
        raise EstimationError("time-price regression needs at least two distinct durations")
    fit = stats.linregress(x, y)
    if not fit.slope > 0:
        raise EstimationError(f"estimated per-minute rate {fit.slope:.4g} is not positive")
    logger.info(f"Time-price fit: alpha {fit.slope:.4f} per minute (r^2 {fit.rvalue ** 2:.3f}, n {x.size})")
    return TimePriceFit(
        alpha=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue ** 2),
        stderr=float(fit.stderr),
        n=int(x.size),
    )


def estimate_demand(
    prices: np.ndarray,
    steps_observed: float,
    min_records: int = MIN_CELL,
    fallback: Optional[DemandEstimate] = None,
    count: Optional[int] = None,
) -> DemandEstimate:
    """
    Lognormal fit by maximum likelihood (mean and population std of log-prices).
    Volume is requests per step. Cells under `min_records` borrow the shape of
    `fallback` and keep their own volume. `count` overrides the number of
    requests behind the volume (filtering drops requests from the price fit only).
    """
    prices = np.asarray(prices, dtype=float)
    prices = prices[prices > 0]
    requests = prices.size if count is None else count
    volume = requests / steps_observed if steps_observed > 0 else 0.0
    if prices.size < min_records:
        if fallback is None:
            raise EstimationError(f"only {prices.size} priced requests (< {min_records}) and no aggregate to fall back on")
        return fallback.model_copy(update={"volume": volume, "n": int(prices.size), "fallback": True})
    logs = np.log(prices)
    sigma = float(logs.std())
    if sigma <= 1e-12:
        raise EstimationError("all prices are equal; a lognormal fit is degenerate")
    return DemandEstimate(mu_log=float(logs.mean()), sigma_log=sigma, volume=volume, n=int(prices.size))


def _observed_steps(frame: pd.DataFrame, step_minutes: int) -> float:
    span = (frame["timestamp"].max() - frame["timestamp"].min()).total_seconds() / 60.0
    return max(span / step_minutes, 1.0)


def estimate_instance(orders: Union[List[OrderRecord], pd.DataFrame], config: EstimationConfig = EstimationConfig()) -> EstimationResult:
    """
    Durations, abnormal filtering, the time-price fit, then per-edge lognormal
    curves, travel times and the driver supply normalizer.
    """
    frame = orders if isinstance(orders, pd.DataFrame) and "duration" in orders.columns else compute_durations(orders)
    if frame.empty:
        raise EstimationError("no orders to estimate from")
    counts = frame.groupby(["origin", "destination"]).size()
    frame, report = filter_abnormal(frame, config.lower_quantile, config.upper_quantile)
    fit = fit_time_price(frame)
    steps = _observed_steps(frame, config.step_minutes)
    if config.supply is not None:
        drivers = config.supply
    else:
        busy_minutes = frame["duration"].sum(skipna=True)
        drivers = busy_minutes / (steps * config.step_minutes)
        if not drivers > 0:
            raise EstimationError("cannot estimate driver supply: no measured trip durations")

    hourly_frame = frame
    if config.hourly and config.weekdays_only:
        hourly_frame = frame[frame["timestamp"].dt.dayofweek < 5]
    days = max(hourly_frame["timestamp"].dt.normalize().nunique(), 1)
    steps_per_hour = 60.0 / config.step_minutes

    edges: Dict[str, EdgeEstimate] = {}
    for (origin, dest), group in frame.groupby(["origin", "destination"], sort=True):
        aggregate = estimate_demand(group["price"].to_numpy(), steps, config.min_records, count=int(counts[(origin, dest)]))
        minutes = float(group["duration"].median()) if group["duration"].notna().any() else float(config.step_minutes)
        hourly: List[DemandEstimate] = []
        if config.hourly:
            cell_frame = hourly_frame[(hourly_frame["origin"] == origin) & (hourly_frame["destination"] == dest)]
            by_hour = cell_frame.groupby(cell_frame["timestamp"].dt.hour)["price"]
            cells = {hour: prices.to_numpy() for hour, prices in by_hour}
            for hour in range(24):
                hourly.append(estimate_demand(cells.get(hour, np.array([])), days * steps_per_hour,
                                              config.min_records, fallback=aggregate))
            fallbacks = sum(h.fallback for h in hourly)
            if fallbacks:
                logger.warning(f"{origin}->{dest}: {fallbacks} hourly cells fell back to the all-hours fit")
        edges[f"{origin}-{dest}"] = EdgeEstimate(
            origin=origin,
            destination=dest,
            minutes=minutes,
            travel_time=max(1, int(round(minutes / config.step_minutes))),
            aggregate=aggregate,
            hourly=hourly,
        )
    logger.info(f"Estimated {len(edges)} edges; driver supply {drivers:.4g} per step")
    return EstimationResult(alpha=fit.alpha, fit=fit, filtering=report, drivers=float(drivers), step_minutes=config.step_minutes, edges=edges)
