"""
Synthetic price series with known ground truth.

Every generator owns a ``numpy.random.default_rng(seed)`` and is
bit-deterministic given its parameters and seed.
"""
import math
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..fitting.functions import eval_feedback_price, eval_fts_log_price, eval_lppl_log_price
from ..fitting.params import FeedbackODEParams, LPPLParams, PowerLawFTSParams
from ..series.models import PriceSeries
from ..utils.errors import InvalidParameter


class GBMParams(BaseModel):
    """Geometric random walk: ln p[i+1] = ln p[i] + mu + sigma * xi"""
    model_config = ConfigDict(frozen=True)

    p0: float = Field(gt=0)
    mu: float = 0.0
    sigma: float = Field(ge=0)
    n: int = Field(ge=2)


def _noise(rng: np.random.Generator, size: int, sigma: float) -> np.ndarray:
    if sigma < 0:
        raise InvalidParameter(f"noise_sigma must be non-negative, got {sigma}")
    draws = rng.standard_normal(size)
    return sigma * draws if sigma > 0 else np.zeros(size)


def gen_gbm(params: GBMParams, seed: Optional[int] = None, label: str = "gbm") -> PriceSeries:
    rng = np.random.default_rng(seed)
    steps = params.mu + _noise(rng, params.n - 1, params.sigma)
    logp = math.log(params.p0) + np.concatenate(([0.0], np.cumsum(steps)))
    return PriceSeries(times=np.arange(params.n), prices=np.exp(logp), label=label)


def gen_fts(params: Union[PowerLawFTSParams, LPPLParams], noise_sigma: float,
            seed: Optional[int], t_grid: Sequence[float], label: str = "fts") -> PriceSeries:
    """Log price from the FTS or LPPL evaluator plus Gaussian noise"""
    t = np.asarray(t_grid, dtype=float)
    if isinstance(params, LPPLParams):
        model = eval_lppl_log_price(params, t)
    else:
        model = eval_fts_log_price(params, t)
    rng = np.random.default_rng(seed)
    logp = model + _noise(rng, len(t), noise_sigma)
    return PriceSeries(times=t, prices=np.exp(logp), label=label)


def gen_feedback(params: FeedbackODEParams, noise_sigma: float, seed: Optional[int],
                 t_grid: Sequence[float], label: str = "feedback") -> PriceSeries:
    """Closed-form solution of dp/dt = c p^2 with multiplicative log-normal noise"""
    t = np.asarray(t_grid, dtype=float)
    price = eval_feedback_price(params, t)
    rng = np.random.default_rng(seed)
    return PriceSeries(times=t, prices=price * np.exp(_noise(rng, len(t), noise_sigma)), label=label)


def integrate_feedback(params: FeedbackODEParams, times: Sequence[float],
                       dt: float = 1e-5) -> np.ndarray:
    """
    Classical RK4 integration of dp/dt = c p^2 from p(0) = p0.

    Independent of the closed form; used to check it. Steps between
    consecutive requested times are shortened to land on them exactly.
    """
    targets = np.asarray(times, dtype=float)
    if np.any(targets < 0) or np.any(np.diff(targets) < 0):
        raise InvalidParameter("Integration times must be non-negative and sorted")

    def rate(p: float) -> float:
        return params.c * p * p

    out = np.empty(len(targets))
    t, p = 0.0, params.p0
    for k, target in enumerate(targets):
        n_steps = max(int(math.ceil((target - t) / dt)), 0)
        h = (target - t) / n_steps if n_steps else 0.0
        for _ in range(n_steps):
            k1 = rate(p)
            k2 = rate(p + 0.5 * h * k1)
            k3 = rate(p + 0.5 * h * k2)
            k4 = rate(p + h * k3)
            p += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        t = float(target)
        out[k] = p
    return out


def append_crash(series: PriceSeries, drop: float, days: int) -> PriceSeries:
    """Extend a series with a log-linear decline losing ``drop`` over ``days`` steps"""
    if not 0 < drop < 1 or days < 1:
        raise InvalidParameter("Crash needs 0 < drop < 1 and at least one day")
    last = series.prices[-1]
    fractions = np.arange(1, days + 1) / days
    tail = last * np.exp(fractions * math.log1p(-drop))
    times = np.concatenate((series.t, series.t_end + np.arange(1, days + 1)))
    return PriceSeries(times=times, prices=np.concatenate((series.p, tail)), label=series.label)
