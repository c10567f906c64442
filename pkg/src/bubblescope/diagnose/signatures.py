"""
Return-autocorrelation signature of herding markets.

Trend-following at short horizons shows up as positive lag-1 correlation of
short-horizon returns; value reversion at long horizons as negative lag-1
correlation of long-horizon returns. Only the statistic is computed here.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict

from ..series.models import PriceSeries
from ..utils.errors import DegenerateSample, InvalidParameter, TooShort

MIN_RETURNS = 3


class MomentumSignature(BaseModel):
    model_config = ConfigDict(frozen=True)

    short_lag: int
    long_lag: int
    short_autocorr: float
    long_autocorr: float
    n_short: int
    n_long: int

    @property
    def momentum_then_reversal(self) -> bool:
        return self.short_autocorr > 0 > self.long_autocorr


def horizon_returns(series: PriceSeries, lag: int) -> np.ndarray:
    """Non-overlapping ``lag``-step log returns"""
    if lag < 1:
        raise InvalidParameter(f"lag must be at least 1, got {lag}")
    return np.diff(np.log(series.p)[::lag])


def lag1_autocorr(returns: np.ndarray) -> float:
    if len(returns) < MIN_RETURNS:
        raise TooShort(f"Need at least {MIN_RETURNS} returns, got {len(returns)}")
    head, tail = returns[:-1], returns[1:]
    if np.std(head) == 0 or np.std(tail) == 0:
        raise DegenerateSample("Returns are constant; autocorrelation undefined")
    return float(np.corrcoef(head, tail)[0, 1])


def momentum_reversal(series: PriceSeries, short_lag: int = 5, long_lag: int = 60) -> MomentumSignature:
    if not short_lag < long_lag:
        raise InvalidParameter(f"short_lag {short_lag} must be below long_lag {long_lag}")
    short = horizon_returns(series, short_lag)
    long = horizon_returns(series, long_lag)
    return MomentumSignature(
        short_lag=short_lag,
        long_lag=long_lag,
        short_autocorr=lag1_autocorr(short),
        long_autocorr=lag1_autocorr(long),
        n_short=len(short),
        n_long=len(long),
    )
