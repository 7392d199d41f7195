"""
Ironing: the smallest concave majorant ĝ of a sampled edge objective g.

The envelope is the upper convex hull of (q_i, g(q_i)) over a throughput grid,
built with a monotone-chain scan. Atom throughputs of finite-atom curves are
always on the grid, which makes the hull exact for step demand.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.core.demand import DemandModel
from src.core.objective import ObjectiveKind, objective_array
from src.utils.config import get_settings
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

COLLINEAR_TOL = 1e-12


class IronedObjective(BaseModel):
    """Grid samples of g plus the breakpoints of its concave envelope."""
    model_config = ConfigDict(frozen=True)

    grid: Tuple[float, ...]
    raw_values: Tuple[float, ...]
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    cost: float = 0.0
    objective: ObjectiveKind = ObjectiveKind()
    scale: float = 1.0  # chain edges carry g / travel_time

    @property
    def bq(self) -> np.ndarray:
        return np.asarray(self.breakpoints, dtype=float)

    @property
    def bv(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.bv) / np.diff(self.bq)

    @property
    def top(self) -> float:
        return self.breakpoints[-1]

    def value_array(self, q: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(q, dtype=float), self.bq, self.bv)

    def breakpoint_index(self, q: float) -> int | None:
        """Index of the breakpoint at q (within tolerance), else None."""
        tol = 1e-9 * max(1.0, self.top)
        i = int(np.searchsorted(self.bq, q))
        for j in (i - 1, i):
            if 0 <= j < len(self.bq) and abs(self.bq[j] - q) <= tol:
                return j
        return None

    def segment_index(self, q: float) -> int:
        """Segment j with bq[j] <= q < bq[j+1] (last segment for q = top)."""
        j = int(np.searchsorted(self.bq, q, side="right")) - 1
        return min(max(j, 0), len(self.slopes) - 1)

    def ironed_intervals(self, tol: float = 1e-9) -> List[Tuple[float, float]]:
        """Maximal intervals where the envelope lies strictly above g."""
        grid = np.asarray(self.grid)
        gap = self.value_array(grid) - np.asarray(self.raw_values)
        intervals = []
        for a, b in zip(self.breakpoints[:-1], self.breakpoints[1:]):
            inside = (grid > a) & (grid < b)
            if inside.any() and gap[inside].max() > tol:
                intervals.append((a, b))
        return intervals


def upper_hull(x: Sequence[float], y: Sequence[float]) -> List[int]:
    """Indices of the upper convex hull of points sorted by x; collinear points dropped."""
    hull: List[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            dx1, dy1 = x[a] - x[o], y[a] - y[o]
            dx2, dy2 = x[i] - x[o], y[i] - y[o]
            cross = dx1 * dy2 - dy1 * dx2
            scale = abs(dx1 * dy2) + abs(dy1 * dx2)
            # a is kept only if it lies strictly above the chord o -> i
            if cross >= -COLLINEAR_TOL * scale:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _build(grid: np.ndarray, raw: np.ndarray, cost: float, kind: ObjectiveKind, scale: float = 1.0) -> IronedObjective:
    idx = upper_hull(grid, raw)
    return IronedObjective(
        grid=tuple(grid.tolist()),
        raw_values=tuple(raw.tolist()),
        breakpoints=tuple(grid[idx].tolist()),
        values=tuple(raw[idx].tolist()),
        cost=cost,
        objective=kind,
        scale=scale,
    )


def throughput_grid(curve: DemandModel, grid_size: int) -> np.ndarray:
    top = curve.top()
    grid = np.linspace(0.0, top, grid_size)
    atoms = [q for q in curve.quantile_points() if 0.0 < q <= top]
    return np.unique(np.concatenate([grid, np.asarray(atoms, dtype=float)]))


def iron(curve: DemandModel, cost: float, kind: ObjectiveKind, grid_size: int | None = None) -> IronedObjective:
    """Concave envelope of g(q|e) sampled on a grid of `grid_size` points plus atom throughputs."""
    grid_size = grid_size or get_settings().grid_size
    if grid_size < 2:
        raise ValidationError(f"grid_size must be at least 2, got {grid_size}")
    grid = throughput_grid(curve, grid_size)
    raw = objective_array(curve, cost, kind, grid)
    env = _build(grid, raw, cost, kind)
    logger.debug(f"Ironed {curve.kind} curve: {len(grid)} samples, {len(env.breakpoints)} breakpoints")
    return env


def envelope_value(env: IronedObjective, q: float) -> float:
    if not (0.0 <= q <= env.top * (1 + 1e-12) + 1e-12):
        raise ValidationError(f"throughput {q} outside [0, {env.top}]")
    return float(env.value_array(np.array([q]))[0])


def envelope_derivative(env: IronedObjective, q: float) -> Tuple[float, float]:
    """(left slope, right slope) of ĝ at q; one-sided differences at the ends."""
    slopes = env.slopes
    i = env.breakpoint_index(q)
    if i is not None:
        left = slopes[i - 1] if i > 0 else slopes[0]
        right = slopes[i] if i < len(slopes) else slopes[-1]
        return float(left), float(right)
    j = env.segment_index(q)
    return float(slopes[j]), float(slopes[j])


def coarsen(env: IronedObjective, max_segments: int) -> IronedObjective:
    """Keep at most max_segments + 1 breakpoints, both ends included."""
    if max_segments < 1:
        raise ValidationError(f"max_segments must be at least 1, got {max_segments}")
    n = len(env.breakpoints)
    if n - 1 <= max_segments:
        return env
    keep = np.unique(np.round(np.linspace(0, n - 1, max_segments + 1)).astype(int))
    return env.model_copy(update={
        "breakpoints": tuple(env.bq[keep].tolist()),
        "values": tuple(env.bv[keep].tolist()),
    })


def scaled(env: IronedObjective, factor: float) -> IronedObjective:
    """Envelope of factor * g (travel-time chains split the objective evenly)."""
    return env.model_copy(update={
        "raw_values": tuple((np.asarray(env.raw_values) * factor).tolist()),
        "values": tuple((env.bv * factor).tolist()),
        "scale": env.scale * factor,
    })
