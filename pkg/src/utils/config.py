"""Process-wide settings loaded from the environment (and `.env`)."""

import os

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

load_dotenv()


class Settings(BaseModel):
    """Defaults for every run; CLI flags override these per invocation."""
    model_config = ConfigDict(frozen=True)

    log_level: str = "INFO"
    grid_size: int = Field(default=1000, ge=2)
    max_segments: int = Field(default=1000, ge=1)
    feasibility_tol: float = Field(default=1e-7, gt=0)
    stationarity_tol: float = Field(default=1e-5, gt=0)
    max_pivots: int = Field(default=100_000, ge=1)
    step_minutes: int = Field(default=15, ge=1)
    steps: int = Field(default=96, ge=1)
    seed: int = 0


_settings = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = Settings(
            log_level=os.getenv("FLEETFLOW_LOG", "INFO"),
            grid_size=int(os.getenv("FLEETFLOW_GRID_SIZE", "1000")),
            max_segments=int(os.getenv("FLEETFLOW_MAX_SEGMENTS", "1000")),
            feasibility_tol=float(os.getenv("FLEETFLOW_FEASIBILITY_TOL", "1e-7")),
            stationarity_tol=float(os.getenv("FLEETFLOW_STATIONARITY_TOL", "1e-5")),
            max_pivots=int(os.getenv("FLEETFLOW_MAX_PIVOTS", "100000")),
            step_minutes=int(os.getenv("FLEETFLOW_STEP_MINUTES", "15")),
            steps=int(os.getenv("FLEETFLOW_STEPS", "96")),
            seed=int(os.getenv("FLEETFLOW_SEED", "0")),
        )
    return _settings


def reset_settings() -> None:
    """Drop the cached settings (tests change the environment)."""
    global _settings
    _settings = None
