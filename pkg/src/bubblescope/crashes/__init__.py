from .drawdowns import (
    DEFAULT_CRASH_THRESHOLD,
    DEFAULT_CRASH_WINDOW,
    CrashEvent,
    Drawdown,
    detect_crashes,
    extract_drawdowns,
)
from .export import to_csv, to_records
from .outliers import StretchedExpFit, fit_bulk, flag_kings

__all__ = [
    "DEFAULT_CRASH_THRESHOLD",
    "DEFAULT_CRASH_WINDOW",
    "CrashEvent",
    "Drawdown",
    "StretchedExpFit",
    "detect_crashes",
    "extract_drawdowns",
    "fit_bulk",
    "flag_kings",
    "to_csv",
    "to_records",
]
