"""Order logs in, demand curves and a time-price rate out; plus a synthetic log generator."""

from src.ingestion.estimation import (
    DemandEstimate,
    EdgeEstimate,
    EstimationConfig,
    EstimationResult,
    TimePriceFit,
    estimate_demand,
    estimate_instance,
    fit_time_price,
)
from src.ingestion.filtering import FilterReport, compute_durations, filter_abnormal, frequency_table
from src.ingestion.loader import ORDER_COLUMNS, OrderRecord, ParsedOrders, RowProblem, orders_frame, parse_orders
from src.ingestion.synth import (
    SynthConfig,
    SynthEdge,
    edge_minutes,
    five_region_config,
    load_synth_config,
    synth_generate,
    write_orders,
)

__all__ = [
    "DemandEstimate",
    "EdgeEstimate",
    "EstimationConfig",
    "EstimationResult",
    "TimePriceFit",
    "estimate_demand",
    "estimate_instance",
    "fit_time_price",
    "FilterReport",
    "compute_durations",
    "filter_abnormal",
    "frequency_table",
    "ORDER_COLUMNS",
    "OrderRecord",
    "ParsedOrders",
    "RowProblem",
    "orders_frame",
    "parse_orders",
    "SynthConfig",
    "SynthEdge",
    "edge_minutes",
    "five_region_config",
    "load_synth_config",
    "synth_generate",
    "write_orders",
]
