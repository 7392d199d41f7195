"""KKT certification of solved plans and the economics of their multipliers."""

from src.duality.kkt import (
    KKTReport,
    edge_dual,
    kkt_check,
    stationarity_residual,
    subgradient_interval,
    supply_cost,
)
from src.duality.report import MarginalReport, marginal_report

__all__ = [
    "KKTReport",
    "edge_dual",
    "kkt_check",
    "stationarity_residual",
    "subgradient_interval",
    "supply_cost",
    "MarginalReport",
    "marginal_report",
]
