"""
Pricing policies for the fluid market simulator.

1. fixed - one price per minute of trip, everywhere and always
2. surge - the fixed price times a per-origin multiplier that clears the local market
3. dynam - randomized prices and relocation flows from a solved plan
"""

from typing import Dict, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.solver.plan import FlowPlan, load_plan
from src.utils.errors import ValidationError


class FixedPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["fixed"] = "fixed"
    alpha: float = Field(gt=0, description="Money per minute of trip")


class SurgePolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["surge"] = "surge"
    alpha: float = Field(gt=0, description="Money per minute of trip")
    beta_min: float = Field(default=1.0, ge=1.0)
    beta_max: float = Field(default=5.0, ge=1.0)

    @model_validator(mode="after")
    def _check_range(self):
        if self.beta_max < self.beta_min:
            raise ValueError(f"beta range [{self.beta_min}, {self.beta_max}] is empty")
        return self


class DynamPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["dynam"] = "dynam"
    plan: FlowPlan = Field(description="Plan on original edges (static or dynamic)")
    grid_size: Optional[int] = Field(default=None, ge=2, description="Envelope grid; must match the solve")
    max_segments: Optional[int] = Field(default=None, ge=1)
    period: int = Field(default=0, ge=0, description="Demand period a static plan was solved for")


def make_policy(kind: str, **params) -> Union[FixedPolicy, SurgePolicy, DynamPolicy]:
    """Policy factory; unknown kinds and bad parameters raise ValidationError."""
    factories = {"fixed": FixedPolicy, "surge": SurgePolicy, "dynam": DynamPolicy}
    if kind not in factories:
        raise ValidationError(f"unknown policy {kind!r}; choose from {sorted(factories)}")
    try:
        return factories[kind](**params)
    except ValueError as e:
        raise ValidationError(f"bad {kind} policy parameters: {e}") from e


def parse_policy(spec: str) -> Union[FixedPolicy, SurgePolicy, DynamPolicy]:
    """
    Parse `fixed:alpha=0.5117`, `surge:alpha=0.5117,beta=1..5` or `dynam:plan=path/plan.json`.
    A dynam plan may carry `grid_size`, `max_segments` and `period` options as well.
    """
    kind, _, rest = spec.partition(":")
    params: Dict[str, object] = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"policy option {item!r} is not key=value")
        key = key.strip()
        if key == "beta":
            low, dots, high = value.partition("..")
            if not dots:
                raise ValidationError(f"beta range must look like 1..5, got {value!r}")
            try:
                params["beta_min"], params["beta_max"] = float(low), float(high)
            except ValueError as e:
                raise ValidationError(f"beta range {value!r} is not numeric") from e
        elif key == "plan":
            params["plan"] = load_plan(value)
        elif key in ("grid_size", "max_segments", "period"):
            try:
                params[key] = int(value)
            except ValueError as e:
                raise ValidationError(f"policy option {key}={value!r} is not an integer") from e
        else:
            try:
                params[key] = float(value)
            except ValueError as e:
                raise ValidationError(f"policy option {key}={value!r} is not a number") from e
    return make_policy(kind.strip().lower(), **params)


def policy_name(policy) -> str:
    return policy.kind.upper()
