"""
Drawdowns and crash events.

A drawdown runs from a local peak down to the lowest price reached before
the decline is interrupted. With a tolerance epsilon > 0, rises that stay
below the peak and amount to at most epsilon of the peak price (measured
from the current trough) do not interrupt it.

A crash is a local maximum from which the price falls strictly more than
``threshold`` within ``window_days``. Every local maximum is a candidate
spanning [peak, trough]; candidates with overlapping spans form one group,
and a group reports a single event at its highest qualifying peak. Groups
are formed before the threshold is applied, so raising the threshold can
only remove events.
"""
import bisect
import logging
from typing import List, NamedTuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..series.models import PriceSeries
from ..utils.errors import InvalidParameter

logger = logging.getLogger(__name__)

DEFAULT_CRASH_THRESHOLD = 0.15
DEFAULT_CRASH_WINDOW = 15


class Drawdown(BaseModel):
    """Peak-to-trough loss"""
    model_config = ConfigDict(frozen=True)

    peak_time: float
    trough_time: float
    peak_price: float = Field(gt=0)
    trough_price: float = Field(gt=0)

    @model_validator(mode="after")
    def _check(self) -> 'Drawdown':
        if not self.peak_time < self.trough_time:
            raise InvalidParameter("Drawdown peak must precede its trough")
        if not self.trough_price < self.peak_price:
            raise InvalidParameter("Drawdown trough must be below its peak")
        return self

    @property
    def magnitude(self) -> float:
        return (self.peak_price - self.trough_price) / self.peak_price

    @property
    def duration(self) -> float:
        return self.trough_time - self.peak_time

    def to_record(self) -> dict:
        record = self.model_dump()
        record["magnitude"] = self.magnitude
        return record


class CrashEvent(BaseModel):
    """Local maximum followed by a drop above the crash threshold"""
    model_config = ConfigDict(frozen=True)

    peak_time: float
    peak_price: float
    trough_time: float
    trough_price: float
    drop: float
    duration_days: float

    def to_record(self) -> dict:
        return self.model_dump()


def extract_drawdowns(series: PriceSeries, epsilon: float = 0.0) -> List[Drawdown]:
    """
    All drawdowns of a series, ordered by peak time and non-overlapping.

    Args:
        series: price series
        epsilon: tolerated interior rise, relative to the drawdown's peak price
    """
    if epsilon < 0:
        raise InvalidParameter(f"epsilon must be non-negative, got {epsilon}")

    times = series.times
    prices = series.prices
    n = len(prices)
    drawdowns = []

    i = 0
    while i < n - 1:
        if prices[i + 1] >= prices[i]:
            i += 1
            continue

        peak = i
        trough = i + 1
        j = i + 1
        while j + 1 < n:
            nxt = prices[j + 1]
            if nxt < prices[trough]:
                trough = j + 1
            elif not (
                epsilon > 0
                and nxt < prices[peak]
                and (nxt - prices[trough]) / prices[peak] <= epsilon
            ):
                break
            j += 1

        drawdowns.append(Drawdown(
            peak_time=times[peak],
            trough_time=times[trough],
            peak_price=prices[peak],
            trough_price=prices[trough],
        ))
        i = trough

    return drawdowns


class _Candidate(NamedTuple):
    peak: int
    trough: int
    drop: float


def _local_maxima_drops(series: PriceSeries, window_days: float) -> List[_Candidate]:
    """Largest drop within the window after every local maximum"""
    times = series.times
    prices = series.prices
    n = len(prices)
    candidates = []
    for i in range(n - 1):
        if not (prices[i + 1] < prices[i] and (i == 0 or prices[i - 1] <= prices[i])):
            continue
        end = bisect.bisect_right(times, times[i] + window_days, lo=i + 1)
        if end == i + 1:
            continue
        # First occurrence of the lowest price in (t_i, t_i + window]
        trough = min(range(i + 1, end), key=lambda k: (prices[k], k))
        candidates.append(_Candidate(i, trough, 1.0 - prices[trough] / prices[i]))
    return candidates


def _clusters(candidates: List[_Candidate]) -> List[List[_Candidate]]:
    """Group candidates whose [peak, trough] index spans overlap, transitively"""
    clusters: List[List[_Candidate]] = []
    reach = -1
    for c in candidates:
        if clusters and c.peak <= reach:
            clusters[-1].append(c)
            reach = max(reach, c.trough)
        else:
            clusters.append([c])
            reach = c.trough
    return clusters


def detect_crashes(series: PriceSeries, threshold: float = DEFAULT_CRASH_THRESHOLD,
                   window_days: float = DEFAULT_CRASH_WINDOW) -> List[CrashEvent]:
    """
    Crash events: drop strictly above ``threshold`` within ``window_days`` of a local maximum.

    Candidates are grouped before the threshold is applied. A group yields one
    event, anchored at its highest qualifying peak (earliest on ties) with that
    peak's own trough and drop.
    """
    if not 0 < threshold < 1:
        raise InvalidParameter(f"Crash threshold must lie in (0, 1), got {threshold}")
    if not window_days > 0:
        raise InvalidParameter(f"Crash window must be positive, got {window_days}")

    times = series.times
    prices = series.prices

    events = []
    for cluster in _clusters(_local_maxima_drops(series, window_days)):
        qualifying = [
            c for c in cluster
            if c.drop > threshold and prices[c.trough] < prices[c.peak] * (1.0 - threshold)
        ]
        if not qualifying:
            continue
        anchor = min(qualifying, key=lambda c: (-prices[c.peak], c.peak))
        events.append(CrashEvent(
            peak_time=times[anchor.peak],
            peak_price=prices[anchor.peak],
            trough_time=times[anchor.trough],
            trough_price=prices[anchor.trough],
            drop=anchor.drop,
            duration_days=times[anchor.trough] - times[anchor.peak],
        ))

    logger.debug("%d crash events in %s (threshold %.3f, window %s)",
                 len(events), series.label, threshold, window_days)
    return events
