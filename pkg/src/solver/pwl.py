"""Piecewise-linear view of an ironed objective: one bounded LP column per segment."""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict

from src.ironing.envelope import IronedObjective, coarsen


class Segment(BaseModel):
    model_config = ConfigDict(frozen=True)

    length: float
    marginal: float


def pwl_discretize(env: IronedObjective, max_segments: Optional[int] = None) -> List[Segment]:
    """
    Breakpoint-to-breakpoint segments of the envelope, coarsened to at most
    `max_segments`. Concavity makes the marginals non-increasing, so filling
    segments in order is optimal and no binary variables are needed.
    """
    if max_segments is not None:
        env = coarsen(env, max_segments)
    lengths = env.bq[1:] - env.bq[:-1]
    return [Segment(length=float(l), marginal=float(s)) for l, s in zip(lengths, env.slopes) if l > 0]
