"""CSV and JSON forms of drawdown and crash lists"""
from typing import List, Sequence, Union

import pandas as pd

from .drawdowns import CrashEvent, Drawdown

CSV_COLUMNS = ["peak_time", "trough_time", "magnitude"]


def _rows(items: Sequence[Union[Drawdown, CrashEvent]]) -> List[dict]:
    rows = []
    for item in items:
        magnitude = item.magnitude if isinstance(item, Drawdown) else item.drop
        rows.append({
            "peak_time": item.peak_time,
            "trough_time": item.trough_time,
            "magnitude": magnitude,
        })
    return rows


def to_csv(items: Sequence[Union[Drawdown, CrashEvent]]) -> str:
    """``peak_time,trough_time,magnitude`` table; crashes report their drop"""
    frame = pd.DataFrame(_rows(items), columns=CSV_COLUMNS)
    return frame.to_csv(index=False, lineterminator="\n")


def to_records(items: Sequence[Union[Drawdown, CrashEvent]]) -> List[dict]:
    return [item.to_record() for item in items]
