"""
Bulk drawdown distribution and outliers.

The bulk (drawdowns up to an upper quantile) is fitted with a stretched
exponential, survival S(d) = exp(-(d/d0)^z), i.e. a Weibull law with shape z
and scale d0. The likelihood accounts for the truncation at the quantile.
A drawdown is an outlier ("king") when the bulk model expects fewer than
``expected_count_max`` events at least as large in a sample of that size.
"""
import logging
import math
from typing import List, Sequence, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats
from scipy.optimize import minimize

from ..utils.errors import DegenerateSample, InvalidParameter, TooFewDrawdowns
from .drawdowns import Drawdown

logger = logging.getLogger(__name__)

MIN_BULK = 20

Item = TypeVar("Item", Drawdown, float)


class StretchedExpFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    d0: float = Field(gt=0)
    z: float = Field(gt=0)
    n_bulk: int = Field(ge=MIN_BULK)
    n_total: int
    quantile: float
    cutoff: float

    def survival(self, d: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        value = np.exp(-np.power(np.asarray(d, dtype=float) / self.d0, self.z))
        return float(value) if np.ndim(d) == 0 else value

    def expected_count(self, d: float, n: int) -> float:
        """Expected number of drawdowns >= d among n under the bulk model"""
        return n * float(self.survival(d))


def _magnitudes(drawdowns: Sequence[Union[Drawdown, float]]) -> np.ndarray:
    values = np.array(
        [d.magnitude if isinstance(d, Drawdown) else float(d) for d in drawdowns],
        dtype=float,
    )
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise InvalidParameter("Drawdown magnitudes must be positive and finite")
    return values


def fit_bulk(drawdowns: Sequence[Union[Drawdown, float]],
             bulk_quantile: float = 0.99) -> StretchedExpFit:
    """
    Maximum-likelihood stretched exponential on drawdowns up to a quantile.

    Args:
        drawdowns: Drawdown records or bare magnitudes
        bulk_quantile: upper empirical quantile kept as the bulk

    Returns:
        StretchedExpFit with scale d0 and stretching exponent z
    """
    if not 0 < bulk_quantile <= 1:
        raise InvalidParameter(f"bulk_quantile must lie in (0, 1], got {bulk_quantile}")
    if len(drawdowns) == 0:
        raise TooFewDrawdowns("No drawdowns to fit")

    x = _magnitudes(drawdowns)
    cutoff = float(np.quantile(x, bulk_quantile))
    bulk = x[x <= cutoff]
    if len(bulk) < MIN_BULK:
        raise TooFewDrawdowns(f"{len(bulk)} bulk drawdowns, need at least {MIN_BULK}")
    if np.ptp(bulk) == 0:
        raise DegenerateSample("All bulk drawdown magnitudes are equal")

    # Untruncated fit as the starting point
    z0, _, d00 = stats.weibull_min.fit(bulk, floc=0)
    truncated = bulk_quantile < 1
    n = len(bulk)

    def negative_log_likelihood(theta: np.ndarray) -> float:
        z, d0 = np.exp(theta)
        ll = stats.weibull_min.logpdf(bulk, z, scale=d0).sum()
        if truncated:
            ll -= n * stats.weibull_min.logcdf(cutoff, z, scale=d0)
        return -ll if np.isfinite(ll) else math.inf

    result = minimize(
        negative_log_likelihood,
        np.log([z0, d00]),
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000},
    )
    z, d0 = np.exp(result.x)
    if not result.success:
        logger.warning("Stretched-exponential fit did not converge: %s", result.message)

    return StretchedExpFit(
        d0=float(d0),
        z=float(z),
        n_bulk=n,
        n_total=len(x),
        quantile=bulk_quantile,
        cutoff=cutoff,
    )


def flag_kings(drawdowns: Sequence[Item], fit: StretchedExpFit,
               expected_count_max: float = 0.1) -> List[Item]:
    """Drawdowns the bulk model expects to see fewer than ``expected_count_max`` times"""
    if len(drawdowns) == 0:
        return []
    x = _magnitudes(drawdowns)
    expected = len(x) * fit.survival(x)
    return [d for d, e in zip(drawdowns, expected) if e < expected_count_max]
