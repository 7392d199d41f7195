"""
Trip durations and abnormal-request filtering.

A trip's duration is the gap until the same driver's next request. Cancelled
requests (gap far too short) and the last request of a shift (gap far too
long) show up as outliers within their origin-destination group.
"""

import logging
from typing import List, Tuple, TypedDict, Union

import numpy as np
import pandas as pd

from src.ingestion.loader import OrderRecord, orders_frame
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

MIN_GROUP = 5


class FilterReport(TypedDict):
    """
    Example:
    {
        "kept": 9812,
        "removed": 1090,
        "unmeasured": 98,
        "small_groups": [["A", "E"]],
        "bounds": {"A->B": [21.3, 35.9]}
    }
    """
    kept: int
    removed: int
    unmeasured: int  # no following request by the same driver
    small_groups: List[Tuple[str, str]]
    bounds: dict


def compute_durations(records: Union[List[OrderRecord], pd.DataFrame]) -> pd.DataFrame:
    """Orders with a `duration` column in minutes (NaN for a driver's last or an anonymous trip)."""
    frame = records if isinstance(records, pd.DataFrame) else orders_frame(records)
    frame = frame.sort_values(["driver_id", "timestamp", "order_id"], na_position="last").copy()
    following = frame.groupby("driver_id", dropna=True)["timestamp"].shift(-1)
    frame["duration"] = (following - frame["timestamp"]).dt.total_seconds() / 60.0
    frame.loc[frame["driver_id"].isna(), "duration"] = np.nan
    return frame.sort_index()


def filter_abnormal(
    frame: pd.DataFrame,
    lower_quantile: float = 0.05,
    upper_quantile: float = 0.95,
    min_group: int = MIN_GROUP,
) -> Tuple[pd.DataFrame, FilterReport]:
    """
    Keep, per (origin, destination), durations inside the group's
    [lower_quantile, upper_quantile] range. Groups with fewer than `min_group`
    measured trips pass through and are flagged. Trips without a duration are
    kept: nothing marks them abnormal.
    """
    if not 0.0 <= lower_quantile <= upper_quantile <= 1.0:
        raise ValidationError(f"quantiles must satisfy 0 <= lower <= upper <= 1, got {lower_quantile}, {upper_quantile}")
    if "duration" not in frame.columns:
        frame = compute_durations(frame)

    keep = pd.Series(True, index=frame.index)
    small, bounds = [], {}
    measured = frame[frame["duration"].notna()]
    for (origin, dest), group in measured.groupby(["origin", "destination"], sort=True):
        if len(group) < min_group:
            small.append((origin, dest))
            continue
        low, high = group["duration"].quantile([lower_quantile, upper_quantile]).tolist()
        bounds[f"{origin}->{dest}"] = [low, high]
        inside = group["duration"].between(low, high)
        keep.loc[group.index] = inside

    kept = frame[keep]
    report: FilterReport = {
        "kept": int(keep.sum()),
        "removed": int((~keep).sum()),
        "unmeasured": int(frame["duration"].isna().sum()),
        "small_groups": small,
        "bounds": bounds,
    }
    if small:
        logger.warning(f"{len(small)} origin-destination groups have fewer than {min_group} trips; left unfiltered")
    logger.info(f"Filtered abnormal requests: kept {report['kept']}, removed {report['removed']}")
    return kept, report


def frequency_table(frame: pd.DataFrame, duration_width: float = 5.0, price_width: float = 5.0) -> pd.DataFrame:
    """Counts per (duration bucket, price bucket); bucket labels are lower edges."""
    measured = frame[frame["duration"].notna()] if "duration" in frame.columns else compute_durations(frame).dropna(subset=["duration"])
    table = pd.DataFrame({
        "duration_min": np.floor(measured["duration"] / duration_width) * duration_width,
        "price_min": np.floor(measured["price"] / price_width) * price_width,
    })
    return table.groupby(["duration_min", "price_min"]).size().rename("count").reset_index()
