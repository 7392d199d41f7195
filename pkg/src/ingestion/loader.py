"""
Order logs: CSV with the exact header `order,driver,user,origin,dest,price,timestamp`.

Rows are validated one by one; bad rows are reported with their file line
number instead of being dropped silently.
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import Iterable, List, Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError

from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

ORDER_COLUMNS = ["order", "driver", "user", "origin", "dest", "price", "timestamp"]

READERS = {
    ".csv": lambda path: pd.read_csv(path, dtype=str, keep_default_na=False),
    ".gz": lambda path: pd.read_csv(path, dtype=str, keep_default_na=False, compression="gzip"),
}


class OrderRecord(BaseModel):
    """One completed request; `driver_id` may be missing in raw logs."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    order_id: str = Field(alias="order", min_length=1)
    driver_id: Optional[str] = Field(default=None, alias="driver")
    user_id: str = Field(alias="user")
    origin: str = Field(min_length=1)
    destination: str = Field(alias="dest", min_length=1)
    price: float = Field(ge=0)
    timestamp: datetime


class RowProblem(BaseModel):
    line: int
    reason: str


class ParsedOrders(BaseModel):
    records: List[OrderRecord]
    problems: List[RowProblem] = []

    def __len__(self) -> int:
        return len(self.records)


def parse_orders(path: Union[str, Path], regions: Optional[Iterable[str]] = None) -> ParsedOrders:
    """Read an order CSV; a missing column is fatal, a malformed row is reported."""
    path = Path(path)
    reader = READERS.get(path.suffix.lower())
    if reader is None:
        raise ValidationError(f"unsupported order file type {path.suffix!r}; expected one of {sorted(READERS)}")
    try:
        frame = reader(path)
    except (OSError, pd.errors.EmptyDataError) as e:
        raise ValidationError(f"cannot read orders from {path}: {e}") from e

    missing = [c for c in ORDER_COLUMNS if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path.name} is missing required columns {missing}")

    known = set(regions) if regions is not None else None
    records, problems = [], []
    for line, row in zip(range(2, len(frame) + 2), frame[ORDER_COLUMNS].to_dict("records")):
        row = {k: v.strip() for k, v in row.items()}
        if not row["driver"]:
            row["driver"] = None
        try:
            record = OrderRecord.model_validate(row)
        except PydanticValidationError as e:
            reason = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
            problems.append(RowProblem(line=line, reason=reason))
            continue
        if known is not None and (record.origin not in known or record.destination not in known):
            problems.append(RowProblem(line=line, reason=f"unknown region in {record.origin}->{record.destination}"))
            continue
        records.append(record)

    if problems:
        logger.warning(f"{path.name}: rejected {len(problems)} malformed rows (first at line {problems[0].line})")
    logger.info(f"Parsed {len(records)} orders from {path.name}")
    return ParsedOrders(records=records, problems=problems)


def orders_frame(records: List[OrderRecord]) -> pd.DataFrame:
    """Columnar view used by filtering and estimation."""
    columns = ["order_id", "driver_id", "user_id", "origin", "destination", "price", "timestamp"]
    frame = pd.DataFrame([r.model_dump() for r in records], columns=columns)
    frame["timestamp"] = pd.to_datetime(frame["timestamp"])
    frame["price"] = frame["price"].astype(float)
    return frame
