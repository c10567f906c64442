"""
Price series records.

Both records are immutable pydantic models; arrays are exposed through
properties so downstream numerical code never mutates a series in place.
"""
import math
from typing import Any, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..utils.errors import InvalidParameter, MalformedPrice, NonMonotonicTime, TooShort

Epoch = Union[float, int]


def _as_float_tuple(value: Any) -> Tuple[float, ...]:
    return tuple(float(x) for x in np.asarray(value, dtype=float).ravel())


def _check_times(times: Tuple[float, ...]) -> None:
    if len(times) < 2:
        raise TooShort(f"Series needs at least 2 observations, got {len(times)}")
    if not all(math.isfinite(t) for t in times):
        raise NonMonotonicTime("Times must be finite")
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            raise NonMonotonicTime(
                f"Time {times[i]!r} at row {i} does not follow {times[i - 1]!r}"
            )


class PriceSeries(BaseModel):
    """Ordered (time, price) observations with positive prices"""
    model_config = ConfigDict(frozen=True)

    times: Tuple[float, ...]
    prices: Tuple[float, ...]
    label: str = "series"

    @field_validator("times", "prices", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> Tuple[float, ...]:
        try:
            return _as_float_tuple(value)
        except (TypeError, ValueError) as e:
            raise MalformedPrice(f"Values are not numeric: {e}")

    @model_validator(mode="after")
    def _check(self) -> 'PriceSeries':
        if len(self.times) != len(self.prices):
            raise InvalidParameter(
                f"{len(self.times)} times but {len(self.prices)} prices"
            )
        _check_times(self.times)
        for i, p in enumerate(self.prices):
            if not math.isfinite(p) or p <= 0:
                raise MalformedPrice(f"Price {p!r} at row {i} is not a positive number")
        return self

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.prices, dtype=float)

    @property
    def t_start(self) -> float:
        return self.times[0]

    @property
    def t_end(self) -> float:
        return self.times[-1]


class LogPriceSeries(BaseModel):
    """Natural log of a price series"""
    model_config = ConfigDict(frozen=True)

    times: Tuple[float, ...]
    logp: Tuple[float, ...]
    label: str = "series"

    @field_validator("times", "logp", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> Tuple[float, ...]:
        return _as_float_tuple(value)

    @model_validator(mode="after")
    def _check(self) -> 'LogPriceSeries':
        if len(self.times) != len(self.logp):
            raise InvalidParameter(
                f"{len(self.times)} times but {len(self.logp)} log prices"
            )
        _check_times(self.times)
        if not all(math.isfinite(y) for y in self.logp):
            raise MalformedPrice("Log prices must be finite")
        return self

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.logp, dtype=float)

    @property
    def t_start(self) -> float:
        return self.times[0]

    @property
    def t_end(self) -> float:
        return self.times[-1]


def log_prices(series: PriceSeries) -> LogPriceSeries:
    """Natural log of every price; times unchanged"""
    return LogPriceSeries(times=series.times, logp=np.log(series.p), label=series.label)


def _window_mask(times: np.ndarray, t_start: Epoch, t_end: Epoch) -> np.ndarray:
    if not t_start < t_end:
        raise InvalidParameter(f"Window start {t_start} must precede end {t_end}")
    mask = (times >= t_start) & (times <= t_end)
    if int(mask.sum()) < 2:
        raise TooShort(
            f"Window [{t_start}, {t_end}] holds {int(mask.sum())} observations, need 2"
        )
    return mask


def window(series: Union[PriceSeries, LogPriceSeries], t_start: Epoch, t_end: Epoch):
    """
    Observations with t_start <= time <= t_end, order preserved.

    Works on both record types and returns the same type it was given.
    """
    mask = _window_mask(series.t, t_start, t_end)
    times = series.t[mask]
    if isinstance(series, LogPriceSeries):
        return LogPriceSeries(times=times, logp=series.y[mask], label=series.label)
    return PriceSeries(times=times, prices=series.p[mask], label=series.label)


def scale(series: PriceSeries, k: float) -> PriceSeries:
    """Multiply every price by k > 0"""
    if not k > 0:
        raise InvalidParameter(f"Scale factor must be positive, got {k}")
    return PriceSeries(times=series.times, prices=series.p * k, label=series.label)


def shift(series: PriceSeries, dt: float) -> PriceSeries:
    """Translate every time by dt"""
    return PriceSeries(times=series.t + dt, prices=series.prices, label=series.label)
