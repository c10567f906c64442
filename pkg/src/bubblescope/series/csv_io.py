"""
Reading and writing price series.

CSV input has the header ``date,close``. The date column is either an
ISO-8601 calendar date (mapped to trading-day indices 0, 1, 2, ... in row
order) or a non-negative number taken verbatim as the time index.
"""
import io
import json
import logging
import math
from pathlib import Path
from typing import List, Union

import pandas as pd
from dateutil.parser import isoparse

from ..utils.errors import (
    InputError,
    MalformedCSV,
    MalformedPrice,
    NonMonotonicTime,
    TooShort,
)
from ..utils.files import write_text_atomic
from .models import PriceSeries

logger = logging.getLogger(__name__)

HEADER = ["date", "close"]


def _parse_number(text: str) -> Union[float, None]:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _parse_times(dates: List[str]) -> List[float]:
    """Numeric indices verbatim, ISO dates mapped to row order"""
    first = _parse_number(dates[0])

    if first is not None:
        times = []
        for row, text in enumerate(dates):
            value = _parse_number(text)
            if value is None or value < 0:
                raise MalformedCSV(f"Row {row}: {text!r} is not a non-negative time index")
            times.append(value)
        return times

    previous = None
    for row, text in enumerate(dates):
        try:
            stamp = isoparse(text)
        except (ValueError, OverflowError):
            raise MalformedCSV(f"Row {row}: {text!r} is not an ISO-8601 date")
        if previous is not None and stamp <= previous:
            raise NonMonotonicTime(f"Row {row}: date {text} does not follow {previous.date()}")
        previous = stamp
    return [float(i) for i in range(len(dates))]


def parse_csv(text: str, label: str = "series") -> PriceSeries:
    """
    Parse ``date,close`` text into a PriceSeries.

    Raises:
        MalformedCSV: bad header or unreadable date
        MalformedPrice: missing, non-numeric or non-positive close
        NonMonotonicTime: times not strictly increasing
        TooShort: fewer than 2 rows
    """
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        raise MalformedCSV("Input is empty; expected header 'date,close'")
    except pd.errors.ParserError as e:
        raise MalformedCSV(f"Could not read CSV: {e}")

    columns = [str(c).strip().lower() for c in frame.columns]
    if columns != HEADER:
        raise MalformedCSV(f"Expected header 'date,close', got {','.join(map(str, frame.columns))!r}")

    if len(frame) < 2:
        raise TooShort(f"Series needs at least 2 rows, got {len(frame)}")

    dates = [d.strip() for d in frame.iloc[:, 0]]
    closes = [c.strip() for c in frame.iloc[:, 1]]

    prices = []
    for row, text in enumerate(closes):
        value = _parse_number(text)
        if value is None or value <= 0:
            raise MalformedPrice(f"Row {row}: close {text!r} is not a positive number")
        prices.append(value)

    times = _parse_times(dates)
    return PriceSeries(times=times, prices=prices, label=label)


def _format_time(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def to_csv(series: PriceSeries) -> str:
    """Canonical ``date,close`` text; re-parses to an identical series"""
    frame = pd.DataFrame({
        "date": [_format_time(t) for t in series.times],
        "close": [repr(p) for p in series.prices],
    })
    return frame.to_csv(index=False, lineterminator="\n")


def to_json(series: PriceSeries) -> str:
    return series.model_dump_json()


def from_json(text: str) -> PriceSeries:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedCSV(f"Series JSON is not valid: {e}")
    # Accept both the bare record and the CLI's {"series": {...}} wrapper
    if isinstance(data, dict) and isinstance(data.get("series"), dict):
        data = data["series"]
    if not isinstance(data, dict) or "times" not in data or "prices" not in data:
        raise MalformedCSV("Series JSON needs 'times' and 'prices'")
    return PriceSeries(
        times=data["times"], prices=data["prices"], label=data.get("label", "series")
    )


def read_series(path: Union[str, Path]) -> PriceSeries:
    """Load a series from .csv or .json"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e.strerror or e}")
    except UnicodeDecodeError as e:
        raise InputError(f"Cannot read {path}: not UTF-8 text ({e.reason} at byte {e.start})")

    logger.debug("Read %d bytes from %s", len(text), path)
    if path.suffix.lower() == ".json":
        return from_json(text)
    return parse_csv(text, label=path.stem)


def write_series(series: PriceSeries, path: Union[str, Path]) -> Path:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return write_text_atomic(path, to_json(series) + "\n")
    return write_text_atomic(path, to_csv(series))
