"""
Model evaluation.

Evaluators accept a scalar or an array of times and return a float or an
array of the same shape. Every evaluator refuses times at or beyond the
model's critical time.
"""
from typing import Tuple, Union

import numpy as np

from ..series.models import LogPriceSeries
from ..utils.errors import BeyondSingularity, DegenerateDesign, InvalidParameter, TooShort
from .params import ExpFitParams, FeedbackODEParams, LPPLParams, PowerLawFTSParams

TimeLike = Union[float, np.ndarray]

TRADING_DAYS_PER_YEAR = 252


def _distance_to_tc(t_c: float, t: TimeLike) -> np.ndarray:
    dt = t_c - np.asarray(t, dtype=float)
    if np.any(dt <= 0):
        raise BeyondSingularity(f"Model is undefined at t >= t_c = {t_c}")
    return dt


def _unwrap(value: np.ndarray, t: TimeLike) -> TimeLike:
    return float(value) if np.ndim(t) == 0 else value


def eval_fts_log_price(params: PowerLawFTSParams, t: TimeLike) -> TimeLike:
    """A + B (t_c - t)^m"""
    dt = _distance_to_tc(params.t_c, t)
    return _unwrap(params.A + params.B * np.power(dt, params.m), t)


def eval_lppl_log_price(params: LPPLParams, t: TimeLike) -> TimeLike:
    """A + (t_c - t)^m [B + C1 cos(ω ln(t_c - t)) + C2 sin(ω ln(t_c - t))]"""
    dt = _distance_to_tc(params.t_c, t)
    phase = params.omega * np.log(dt)
    value = params.A + np.power(dt, params.m) * (
        params.B + params.C1 * np.cos(phase) + params.C2 * np.sin(phase)
    )
    return _unwrap(value, t)


def eval_feedback_price(params: FeedbackODEParams, t: TimeLike) -> TimeLike:
    """Exact solution p0 / (1 - c p0 t) of dp/dt = c p^2"""
    times = np.asarray(t, dtype=float)
    if np.any(times < 0):
        raise InvalidParameter("Feedback process starts at t = 0")
    _distance_to_tc(params.t_c, times)
    return _unwrap(params.p0 / (1.0 - params.c * params.p0 * times), t)


def eval_exponential_log_price(params: ExpFitParams, t: TimeLike) -> TimeLike:
    value = params.a + params.b * np.asarray(t, dtype=float)
    return _unwrap(value, t)


def fit_exponential(log_series: LogPriceSeries) -> Tuple[ExpFitParams, float]:
    """
    Ordinary least squares of log price on time.

    Returns:
        (params, sum of squared residuals)
    """
    t = log_series.t
    y = log_series.y
    if len(t) < 2:
        raise TooShort("Exponential fit needs at least 2 observations")
    if np.ptp(t) == 0:
        raise DegenerateDesign("Time axis is constant")

    # Centre time for conditioning; shift the intercept back afterwards
    t_mean = t.mean()
    tc = t - t_mean
    b = float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))
    a = float(y.mean() - b * t_mean)

    residuals = y - (a + b * t)
    return ExpFitParams(a=a, b=b), float(np.dot(residuals, residuals))


def annualized_growth(params: ExpFitParams, days_per_year: int = TRADING_DAYS_PER_YEAR) -> float:
    """Constant yearly growth rate implied by a per-day log-linear slope"""
    return float(np.expm1(params.b * days_per_year))
