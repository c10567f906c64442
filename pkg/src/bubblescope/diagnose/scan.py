"""
Sliding-window bubble diagnosis.

Every window is calibrated against the exponential null. A window is
flagged when a fitted model has bubble shape (B < 0, 0 < m < 1, t_c inside
the forecast horizon) and beats the null by at least ``improvement_min``.
Crashes found on the full series are then joined with the flagged windows
that ended at most ``lookback`` days before their peak.

A flag is a warning that the regime is unsustainable, not a crash forecast:
the report carries the spread of t_c across the best refined starts and
emits no crash probability.
"""
import logging
from dataclasses import dataclass, field
from functools import partial
from multiprocessing import Pool
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..crashes.drawdowns import DEFAULT_CRASH_THRESHOLD, DEFAULT_CRASH_WINDOW, CrashEvent, detect_crashes
from ..fitting.calibrate import FitConfig, FitResult, ModelComparison, compare_to_null, fit_fts, fit_lppl
from ..fitting.functions import annualized_growth, fit_exponential
from ..fitting.params import ExpFitParams
from ..series.models import LogPriceSeries, PriceSeries, log_prices, window
from ..utils.errors import BubbleScopeError, InvalidParameter, NoCrashes, TooShort

logger = logging.getLogger(__name__)

ScanModel = Literal["fts", "lppl", "both"]

MIN_WINDOW_LENGTH = 30
TC_SPREAD_WITHIN = 0.05


@dataclass(frozen=True)
class ScanConfig:
    """Window geometry, flag criteria and crash rule of a scan"""
    window_length: float = 250
    step: float = 21
    model: ScanModel = "fts"
    improvement_min: float = 0.25
    # t_c must lie in (t_end, t_end + horizon_fraction * window_length]
    horizon_fraction: float = 0.25
    crash_threshold: float = DEFAULT_CRASH_THRESHOLD
    crash_window: float = DEFAULT_CRASH_WINDOW
    lookback: float = 63
    fit: FitConfig = field(default_factory=FitConfig)
    n_jobs: int = 1

    def validate(self) -> 'ScanConfig':
        if self.window_length < MIN_WINDOW_LENGTH:
            raise InvalidParameter(
                f"window_length must be at least {MIN_WINDOW_LENGTH}, got {self.window_length}"
            )
        if self.step < 1:
            raise InvalidParameter(f"step must be at least 1, got {self.step}")
        if self.model not in ("fts", "lppl", "both"):
            raise InvalidParameter(f"Unknown model {self.model!r}; expected fts, lppl or both")
        if not self.horizon_fraction > 0:
            raise InvalidParameter("horizon_fraction must be positive")
        if not 0 < self.crash_threshold < 1 or not self.crash_window > 0:
            raise InvalidParameter("Crash threshold must lie in (0, 1) and the window be positive")
        if self.lookback < 0:
            raise InvalidParameter("lookback must be non-negative")
        if self.n_jobs < 1:
            raise InvalidParameter("n_jobs must be at least 1")
        self.fit.validate()
        return self

    def horizon(self, t_end: float) -> float:
        return t_end + self.horizon_fraction * self.window_length

    def to_dict(self) -> dict:
        return {
            "window_length": self.window_length,
            "step": self.step,
            "model": self.model,
            "improvement_min": self.improvement_min,
            "horizon_fraction": self.horizon_fraction,
            "crash_threshold": self.crash_threshold,
            "crash_window": self.crash_window,
            "lookback": self.lookback,
            "n_jobs": self.n_jobs,
        }


class NullFit(BaseModel):
    """Exponential null of one window"""
    model_config = ConfigDict(frozen=True)

    params: ExpFitParams
    sse: float
    annualized_growth: float


class WindowDiagnosis(BaseModel):
    model_config = ConfigDict(frozen=True)

    offset: int = 0
    t_start: float
    t_end: float
    n_obs: int
    fits: Tuple[FitResult, ...] = ()
    comparisons: Tuple[ModelComparison, ...] = ()
    null: Optional[NullFit] = None
    bubble_flag: bool = False
    flag_model: Optional[str] = None
    tc_estimate: Optional[float] = None
    tc_spread: Optional[float] = None
    error: Optional[str] = None

    @property
    def classified(self) -> bool:
        return self.error is None

    def fit_for(self, model: str) -> Optional[FitResult]:
        return next((f for f in self.fits if f.model == model), None)

    def to_record(self) -> dict:
        record = {
            "offset": self.offset,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "n_obs": self.n_obs,
            "bubble_flag": self.bubble_flag,
            "flag_model": self.flag_model,
            "tc_estimate": self.tc_estimate,
            "tc_spread": self.tc_spread,
            "error": self.error,
            "null": None,
            "fits": [],
        }
        if self.null is not None:
            record["null"] = {
                "a": self.null.params.a,
                "b": self.null.params.b,
                "sse": self.null.sse,
                "annualized_growth": self.null.annualized_growth,
            }
        for fit, comparison in zip(self.fits, self.comparisons):
            entry = fit.to_record()
            entry["relative_improvement"] = comparison.relative_improvement
            entry["bubble_shape_ok"] = comparison.bubble_shape_ok
            entry["tc_spread"] = fit.tc_spread(TC_SPREAD_WITHIN)
            record["fits"].append(entry)
        return record


class CrashPrecedence(BaseModel):
    """Whether a crash followed a flagged window within the lookback"""
    model_config = ConfigDict(frozen=True)

    crash: CrashEvent
    preceded: bool
    window_offsets: Tuple[int, ...] = ()

    def to_record(self) -> dict:
        return {
            "peak_time": self.crash.peak_time,
            "drop": self.crash.drop,
            "preceded": self.preceded,
            "window_offsets": list(self.window_offsets),
        }


class BubbleReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    windows: Tuple[WindowDiagnosis, ...]
    crashes: Tuple[CrashEvent, ...]
    precedence: Tuple[CrashPrecedence, ...]
    lookback: float

    @property
    def flagged(self) -> List[WindowDiagnosis]:
        return [w for w in self.windows if w.bubble_flag]

    def flag_rate(self) -> float:
        """Share of successfully classified windows that are flagged"""
        classified = [w for w in self.windows if w.classified]
        if not classified:
            return 0.0
        return sum(w.bubble_flag for w in classified) / len(classified)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "lookback": self.lookback,
            "flag_rate": self.flag_rate(),
            "precedence_rate": precedence_rate(self) if self.crashes else None,
            "windows": [w.to_record() for w in self.windows],
            "crashes": [c.to_record() for c in self.crashes],
            "precedence": [p.to_record() for p in self.precedence],
        }


def _selected_fits(log_window: LogPriceSeries, config: ScanConfig) -> List[FitResult]:
    fts = fit_fts(log_window, config.fit)
    if config.model == "fts":
        return [fts]
    lppl = fit_lppl(log_window, config.fit, fts_seed=fts)
    return [lppl] if config.model == "lppl" else [fts, lppl]


def classify_window(log_window: LogPriceSeries, config: Optional[ScanConfig] = None) -> WindowDiagnosis:
    """
    Calibrate one window and decide whether it is in a bubble regime.

    Raises calibration errors unchanged (constant prices give DegenerateDesign).
    """
    config = (config or ScanConfig()).validate()

    null_params, null_sse = fit_exponential(log_window)
    fits = _selected_fits(log_window, config)
    horizon = config.horizon(log_window.t_end)
    comparisons = [compare_to_null(f, horizon) for f in fits]

    qualifying = [
        (c.relative_improvement, f) for f, c in zip(fits, comparisons)
        if c.bubble_shape_ok and c.relative_improvement >= config.improvement_min
    ]
    if qualifying:
        # Several qualifying models: report the one with the larger improvement
        _, chosen = max(qualifying, key=lambda q: q[0])
    else:
        chosen = fits[0]

    return WindowDiagnosis(
        t_start=log_window.t_start,
        t_end=log_window.t_end,
        n_obs=len(log_window),
        fits=tuple(fits),
        comparisons=tuple(comparisons),
        null=NullFit(
            params=null_params, sse=null_sse, annualized_growth=annualized_growth(null_params),
        ),
        bubble_flag=bool(qualifying),
        flag_model=chosen.model if qualifying else None,
        tc_estimate=chosen.params.t_c,
        tc_spread=chosen.tc_spread(TC_SPREAD_WITHIN),
    )


def window_starts(series: PriceSeries, config: ScanConfig) -> List[float]:
    """Start times of all windows that fit entirely inside the series"""
    last_start = series.t_end - (config.window_length - 1)
    return [float(t) for t in np.arange(series.t_start, last_start + 1e-9, config.step)]


def _diagnose_at(log_series: LogPriceSeries, config: ScanConfig,
                 job: Tuple[int, float]) -> WindowDiagnosis:
    offset, t_start = job
    t_end = t_start + config.window_length - 1
    try:
        log_window = window(log_series, t_start, t_end)
        diagnosis = classify_window(log_window, config)
    except BubbleScopeError as e:
        n_obs = int(np.count_nonzero((log_series.t >= t_start) & (log_series.t <= t_end)))
        logger.warning("Window %d [%s, %s] not classified: %s: %s",
                       offset, t_start, t_end, e.code, e.message)
        return WindowDiagnosis(
            offset=offset, t_start=t_start, t_end=t_end, n_obs=n_obs, error=e.code,
        )
    logger.info("Window %d ending %s: flag=%s t_c=%.2f",
                offset, diagnosis.t_end, diagnosis.bubble_flag, diagnosis.tc_estimate)
    return diagnosis.model_copy(update={"offset": offset})


def _precedence(crashes: Sequence[CrashEvent], windows: Sequence[WindowDiagnosis],
                lookback: float) -> List[CrashPrecedence]:
    table = []
    for crash in crashes:
        offsets = tuple(
            w.offset for w in windows
            if w.bubble_flag and 0 <= crash.peak_time - w.t_end <= lookback
        )
        table.append(CrashPrecedence(crash=crash, preceded=bool(offsets), window_offsets=offsets))
    return table


def scan(series: PriceSeries, config: Optional[ScanConfig] = None) -> BubbleReport:
    """
    Diagnose every window of a series and join the flags with its crashes.

    Windows cover ``window_length`` consecutive days starting every ``step``
    days. Windows failing with a domain error are kept in the report with
    their error code and no flag.
    """
    config = (config or ScanConfig()).validate()
    if len(series) < config.window_length:
        raise TooShort(
            f"Series {series.label} has {len(series)} observations, window needs {config.window_length}"
        )

    log_series = log_prices(series)
    jobs = list(enumerate(window_starts(series, config)))
    worker = partial(_diagnose_at, log_series, config)
    logger.info("Scanning %s: %d windows of %s days, model %s",
                series.label, len(jobs), config.window_length, config.model)

    if config.n_jobs > 1 and len(jobs) > 1:
        with Pool(processes=min(config.n_jobs, len(jobs))) as pool:
            diagnoses = pool.map(worker, jobs)
    else:
        diagnoses = [worker(job) for job in jobs]
    diagnoses.sort(key=lambda d: d.offset)

    crashes = detect_crashes(series, config.crash_threshold, config.crash_window)
    return BubbleReport(
        label=series.label,
        windows=tuple(diagnoses),
        crashes=tuple(crashes),
        precedence=tuple(_precedence(crashes, diagnoses, config.lookback)),
        lookback=config.lookback,
    )


def precedence_rate(report: BubbleReport) -> float:
    """Fraction of crashes preceded by a flagged window within the lookback"""
    if not report.precedence:
        raise NoCrashes(f"No crashes in {report.label}; precedence rate undefined")
    return sum(p.preceded for p in report.precedence) / len(report.precedence)
