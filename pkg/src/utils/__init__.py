from src.utils.config import Settings, get_settings, reset_settings
from src.utils.errors import (
    CertificationError,
    EstimationError,
    FleetFlowError,
    SolveError,
    ValidationError,
)
from src.utils.logging_config import setup_logging

__all__ = [
    "Settings",
    "get_settings",
    "reset_settings",
    "FleetFlowError",
    "ValidationError",
    "EstimationError",
    "SolveError",
    "CertificationError",
    "setup_logging",
]
