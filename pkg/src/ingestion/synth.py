"""
Synthetic order logs with known ground truth.

Per edge, log-prices are N(mu_log, sigma_log^2) and E[price | minutes] = alpha * minutes:
    minutes = exp(mu_t) * LogN(0, sigma_t)
    price   = alpha * minutes * m,   log m ~ N(-sigma_m^2 / 2, sigma_m^2)
with sigma_m^2 = sigma_log^2 - sigma_t^2 and mu_t = mu_log - log(alpha) + sigma_m^2 / 2.
Drivers chain trips back to back, so a trip's duration is the gap to the
driver's next request; a small fraction of gaps is distorted the way
cancellations and shift ends distort real logs.
"""

import logging
import math
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.ingestion.loader import ORDER_COLUMNS
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)


class SynthEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    origin: str
    destination: str
    mu_log: float
    sigma_log: float = Field(gt=0)
    requests: int = Field(ge=0)


class SynthConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    regions: List[str]
    edges: List[SynthEdge]
    alpha: float = Field(default=0.5117, gt=0)
    duration_spread: float = Field(default=0.1, gt=0)  # sigma of log trip minutes
    abnormal_fraction: float = Field(default=0.01, ge=0, le=1)
    trips_per_driver: int = Field(default=50, ge=1)
    start: str = "2017-03-06T00:00:00"  # a Monday
    days: int = Field(default=5, ge=1)

    @model_validator(mode="after")
    def _check(self):
        known = set(self.regions)
        for e in self.edges:
            if e.origin not in known or e.destination not in known:
                raise ValueError(f"edge {e.origin}->{e.destination} uses an unknown region")
            if e.sigma_log <= self.duration_spread:
                raise ValueError(f"sigma_log {e.sigma_log} must exceed duration_spread {self.duration_spread}")
        return self


def edge_minutes(edge: SynthEdge, config: SynthConfig) -> float:
    """Median trip minutes implied by an edge's price distribution and alpha."""
    sigma_m2 = edge.sigma_log ** 2 - config.duration_spread ** 2
    return math.exp(edge.mu_log - math.log(config.alpha) + sigma_m2 / 2)


def synth_generate(config: SynthConfig, seed: int = 0) -> pd.DataFrame:
    """Order log as a frame with the CSV columns; identical seeds give identical output."""
    rng = np.random.default_rng(seed)
    parts = []
    for e in config.edges:
        if e.requests == 0:
            continue
        sigma_m2 = e.sigma_log ** 2 - config.duration_spread ** 2
        minutes = edge_minutes(e, config) * rng.lognormal(0.0, config.duration_spread, e.requests)
        markup = rng.lognormal(-sigma_m2 / 2, math.sqrt(sigma_m2), e.requests)
        parts.append(pd.DataFrame({
            "origin": e.origin,
            "dest": e.destination,
            "price": config.alpha * minutes * markup,
            "minutes": minutes,
        }))
    if not parts:
        return pd.DataFrame(columns=ORDER_COLUMNS)

    orders = pd.concat(parts, ignore_index=True)
    orders = orders.iloc[rng.permutation(len(orders))].reset_index(drop=True)
    n = len(orders)

    gaps = orders["minutes"].to_numpy().copy()
    abnormal = rng.random(n) < config.abnormal_fraction
    cancelled = abnormal & (rng.random(n) < 0.5)
    gaps[cancelled] *= rng.uniform(0.05, 0.2, int(cancelled.sum()))
    shift_end = abnormal & ~cancelled
    gaps[shift_end] *= rng.uniform(3.0, 10.0, int(shift_end.sum()))

    driver = np.arange(n) // config.trips_per_driver
    drivers = driver.max() + 1
    start = pd.Timestamp(config.start)
    first = rng.uniform(0.0, config.days * 1440.0, drivers)
    offsets = np.empty(n)
    for d in range(drivers):
        idx = slice(d * config.trips_per_driver, min((d + 1) * config.trips_per_driver, n))
        chain = gaps[idx]
        offsets[idx] = first[d] + np.concatenate([[0.0], np.cumsum(chain[:-1])])
    stamps = start + pd.to_timedelta(np.round(offsets * 60.0), unit="s")

    frame = pd.DataFrame({
        "order": [f"o{i:08d}" for i in range(n)],
        "driver": [f"d{d:06d}" for d in driver],
        "user": [f"u{u:07d}" for u in rng.integers(0, max(n // 3, 1), n)],
        "origin": orders["origin"],
        "dest": orders["dest"],
        "price": orders["price"].round(4),
        "timestamp": stamps.strftime("%Y-%m-%dT%H:%M:%S"),
    })
    logger.info(f"Generated {n} synthetic orders over {len(parts)} edges for {drivers} drivers")
    return frame[ORDER_COLUMNS]


def write_orders(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    frame.to_csv(path, index=False)


def load_synth_config(path: Union[str, Path]) -> SynthConfig:
    try:
        return SynthConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except Exception as e:
        raise ValidationError(f"cannot load synthetic config {path}: {e}") from e


def five_region_config(requests: int = 2000, imbalance: float = 0.0) -> SynthConfig:
    """
    Five regions, every ordered pair, prices growing with distance on a ring.

    With imbalance in [0, 1), trips into R1 get requests * (1 + imbalance) and
    trips out of it requests * (1 - imbalance), so drivers pile up in R1.
    """
    if not 0.0 <= imbalance < 1.0:
        raise ValidationError(f"imbalance must lie in [0, 1), got {imbalance}")
    regions = ["R1", "R2", "R3", "R4", "R5"]
    hub = regions[0]
    edges = []
    for i, o in enumerate(regions):
        for j, d in enumerate(regions):
            hops = min((j - i) % 5, (i - j) % 5)
            factor = 1.0
            if d == hub and o != hub:
                factor += imbalance
            elif o == hub and d != hub:
                factor -= imbalance
            edges.append(SynthEdge(origin=o, destination=d, mu_log=2.4 + 0.35 * hops, sigma_log=0.45,
                                   requests=int(round(requests * factor))))
    return SynthConfig(regions=regions, edges=edges)
