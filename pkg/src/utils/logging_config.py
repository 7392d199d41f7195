import logging
import os
import sys


def setup_logging(level: str | None = None) -> logging.Logger:
    """Configure root logging once; level comes from FLEETFLOW_LOG unless given."""
    level_name = (level or os.getenv("FLEETFLOW_LOG") or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(sys.stdout)
        ],
        force=True,
    )
    return logging.getLogger("fleetflow")
