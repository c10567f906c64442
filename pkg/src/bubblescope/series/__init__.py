from .csv_io import from_json, parse_csv, read_series, to_csv, to_json, write_series
from .models import LogPriceSeries, PriceSeries, log_prices, scale, shift, window

__all__ = [
    "LogPriceSeries",
    "PriceSeries",
    "from_json",
    "log_prices",
    "parse_csv",
    "read_series",
    "scale",
    "shift",
    "to_csv",
    "to_json",
    "window",
    "write_series",
]
