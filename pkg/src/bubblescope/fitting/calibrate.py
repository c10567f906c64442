"""
Calibration of the FTS and LPPL models.

The linear parameters (A, B[, C1, C2]) are profiled out by least squares for
every candidate of the nonlinear ones (t_c, m[, omega]). The nonlinear search
is a grid over the candidates followed by bounded Nelder-Mead refinement of
the best grid points.

Refinement works in the coordinates (ln(t_c - t_end), m[, ln omega]). Times
enter only through ``t_end - t``, so translating a series in time translates
the recovered t_c by the same amount and changes nothing else.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize

from ..series.models import LogPriceSeries
from ..utils.errors import (
    BeyondSingularity,
    DegenerateDesign,
    InvalidParameter,
    NoFit,
    TooShort,
)
from .functions import eval_fts_log_price, eval_lppl_log_price, fit_exponential
from .params import LPPLParams, PowerLawFTSParams

logger = logging.getLogger(__name__)

ModelName = Literal["fts", "lppl"]

# Refinement steps of the initial simplex, in search coordinates
_SIMPLEX_STEPS = (0.1, 0.05, 0.05)


@dataclass(frozen=True)
class FitConfig:
    """Search grids and refinement settings for one calibration"""
    tc_grid: Optional[Tuple[float, ...]] = None
    n_tc: int = 20
    tc_horizon_fraction: float = 0.5
    m_grid: Tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(1, 10))
    omega_grid: Tuple[float, ...] = tuple(3.0 + 1.5 * i for i in range(15))
    refine_max_iter: int = 500
    refine_tol: float = 1e-9
    seed: int = 0
    min_length: int = 30
    n_refine: int = 5
    m_bounds: Tuple[float, float] = (0.01, 0.99)
    omega_bounds: Tuple[float, float] = (1.0, 40.0)
    restart_jitter: float = 0.0

    def validate(self) -> 'FitConfig':
        if self.tc_grid is not None and len(self.tc_grid) == 0:
            raise InvalidParameter("tc_grid must not be empty")
        if not self.m_grid or not self.omega_grid:
            raise InvalidParameter("m_grid and omega_grid must not be empty")
        if self.n_tc < 1 or self.n_refine < 1 or self.refine_max_iter < 1:
            raise InvalidParameter("n_tc, n_refine and refine_max_iter must be positive")
        if not self.tc_horizon_fraction > 0:
            raise InvalidParameter("tc_horizon_fraction must be positive")
        if self.min_length < 4:
            raise InvalidParameter("min_length must be at least 4")
        lo, hi = self.m_bounds
        if not 0 < lo < hi < 1:
            raise InvalidParameter(f"m_bounds must satisfy 0 < lo < hi < 1, got {self.m_bounds}")
        if not 0 < self.omega_bounds[0] < self.omega_bounds[1]:
            raise InvalidParameter(f"Invalid omega_bounds {self.omega_bounds}")
        if self.restart_jitter < 0:
            raise InvalidParameter("restart_jitter must be non-negative")
        return self

    def horizon(self, log_series: LogPriceSeries) -> float:
        """
        Largest distance past the window end searched for t_c.

        Measured on the time axis: ``tc_horizon_fraction`` times t_end - t_start,
        which on a unit grid is one less than the number of observations. The
        scan applies its own flag horizon from ``window_length`` afterwards.
        """
        span = log_series.t_end - log_series.t_start
        return self.tc_horizon_fraction * span

    def tc_offsets(self, log_series: LogPriceSeries) -> np.ndarray:
        """Candidate t_c - t_end values"""
        if self.tc_grid is not None:
            offsets = np.asarray(self.tc_grid, dtype=float) - log_series.t_end
            if np.any(offsets <= 0):
                raise InvalidParameter("Every t_c candidate must lie after the last observation")
            return offsets
        h = self.horizon(log_series)
        return h * np.arange(1, self.n_tc + 1) / self.n_tc


class RefinedStart(BaseModel):
    """Outcome of refining one grid start"""
    model_config = ConfigDict(frozen=True)

    t_c: float
    m: float
    omega: Optional[float] = None
    sse: float
    start_sse: float
    converged: bool


class FitResult(BaseModel):
    """Calibrated model with residual statistics and the exponential null"""
    model_config = ConfigDict(frozen=True)

    model: ModelName
    params: Union[PowerLawFTSParams, LPPLParams]
    sse: float = Field(ge=0)
    n_obs: int
    null_sse: float = Field(ge=0)
    sse_ratio: float = Field(ge=0)
    converged: bool
    starts_explored: int
    t_end: float
    tc_horizon: float
    m_at_bound: bool = False
    refined: Tuple[RefinedStart, ...] = Field(default=(), exclude=True)

    def tc_spread(self, within: float = 0.05) -> float:
        """Spread of t_c over refined starts whose SSE is within ``within`` of the best"""
        cutoff = self.sse * (1.0 + within)
        candidates = [s.t_c for s in self.refined if s.sse <= cutoff]
        if not candidates:
            return 0.0
        return float(max(candidates) - min(candidates))

    def to_record(self) -> dict:
        """Flat JSON record"""
        p = self.params
        record = {
            "model": self.model,
            "A": p.A,
            "B": p.B,
            "tc": p.t_c,
            "m": p.m,
            "sse": self.sse,
            "null_sse": self.null_sse,
            "sse_ratio": self.sse_ratio,
            "converged": self.converged,
            "starts_explored": self.starts_explored,
            "m_at_bound": self.m_at_bound,
        }
        if isinstance(p, LPPLParams):
            record.update({"C1": p.C1, "C2": p.C2, "omega": p.omega})
        return record


class ModelComparison(BaseModel):
    model_config = ConfigDict(frozen=True)

    sse_ratio: float
    relative_improvement: float
    bubble_shape_ok: bool


# --- profiling -----------------------------------------------------------------------


def _design(back: np.ndarray, d: float, m: float, omega: Optional[float]) -> np.ndarray:
    """Regressors at t_c = t_end + d; ``back`` holds t_end - t"""
    dt = d + back
    f = np.power(dt, m)
    if omega is None:
        return np.column_stack((np.ones_like(dt), f))
    phase = omega * np.log(dt)
    return np.column_stack((np.ones_like(dt), f, f * np.cos(phase), f * np.sin(phase)))


def _solve_line(f: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float]:
    """Closed-form OLS of y on (1, f)"""
    fc = f - f.mean()
    var = float(np.dot(fc, fc))
    if not var > np.finfo(float).eps * float(np.dot(f, f)) * len(f):
        raise DegenerateDesign("Power-law regressor is constant over the window")
    yc = y - y.mean()
    b = float(np.dot(fc, yc)) / var
    a = float(y.mean()) - b * float(f.mean())
    residuals = yc - b * fc
    return np.array([a, b]), float(np.dot(residuals, residuals))


def _solve(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float]:
    if not np.all(np.isfinite(X)):
        raise DegenerateDesign("Design matrix has non-finite entries")
    if X.shape[1] == 2:
        return _solve_line(X[:, 1], y)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise DegenerateDesign(f"Design matrix has rank {rank} < {X.shape[1]}")
    residuals = y - X @ coef
    return coef, float(np.dot(residuals, residuals))


def _profile(back: np.ndarray, y: np.ndarray, d: float, m: float,
             omega: Optional[float]) -> Tuple[np.ndarray, float]:
    return _solve(_design(back, d, m, omega), y)


def profile_linear(log_series: LogPriceSeries, t_c: float, m: float,
                   omega: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """
    Least-squares linear parameters for fixed nonlinear ones.

    Args:
        log_series: window to fit
        t_c: critical time, after the last observation
        m: exponent, non-zero
        omega: log-frequency for LPPL; None profiles the plain power law

    Returns:
        (coefficients, SSE): (A, B) for FTS or (A, B, C1, C2) for LPPL
    """
    if m == 0:
        raise InvalidParameter("Exponent m must be non-zero")
    if omega is not None and not omega > 0:
        raise InvalidParameter("omega must be positive")
    n_linear = 2 if omega is None else 4
    if len(log_series) < n_linear:
        raise TooShort(f"Need at least {n_linear} observations, got {len(log_series)}")

    d = t_c - log_series.t_end
    if not d > 0:
        raise BeyondSingularity(f"t_c = {t_c} must lie after the last observation")

    back = log_series.t_end - log_series.t
    return _profile(back, log_series.y, d, m, omega)


# --- search --------------------------------------------------------------------------


@dataclass(order=True)
class _Start:
    sse: float
    d: float
    m: float
    omega: float = field(default=0.0)


class _Problem:
    """Profiled objective over search coordinates for one window"""

    def __init__(self, log_series: LogPriceSeries, config: FitConfig, lppl: bool):
        self.back = log_series.t_end - log_series.t
        self.y = log_series.y
        self.lppl = lppl
        self.config = config

        offsets = config.tc_offsets(log_series)
        self.offsets = offsets
        d_max = max(config.horizon(log_series), float(offsets.max()))
        d_min = min(d_max * 1e-3, float(offsets.min()))
        self.d_max = d_max
        self.bounds = [(math.log(d_min), math.log(d_max)), config.m_bounds]
        if lppl:
            lo, hi = config.omega_bounds
            self.bounds.append((math.log(lo), math.log(hi)))

    def sse(self, d: float, m: float, omega: Optional[float]) -> float:
        try:
            return _profile(self.back, self.y, d, m, omega)[1]
        except DegenerateDesign:
            return math.inf

    def to_coords(self, start: _Start) -> np.ndarray:
        x = [math.log(start.d), start.m]
        if self.lppl:
            x.append(math.log(start.omega))
        return np.array(x)

    def from_coords(self, x: np.ndarray) -> Tuple[float, float, Optional[float]]:
        omega = math.exp(x[2]) if self.lppl else None
        return math.exp(x[0]), float(x[1]), omega

    def objective(self, x: np.ndarray) -> float:
        d, m, omega = self.from_coords(x)
        return self.sse(d, m, omega)

    def clip(self, x: np.ndarray) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.clip(x, lo, hi)

    def initial_simplex(self, x0: np.ndarray) -> np.ndarray:
        simplex = [x0]
        for i in range(len(x0)):
            vertex = x0.copy()
            step = _SIMPLEX_STEPS[i]
            # Step inward when the start sits on its upper bound
            if vertex[i] + step > self.bounds[i][1]:
                step = -step
            vertex[i] += step
            simplex.append(vertex)
        return np.array(simplex)


def _grid_starts(problem: _Problem, config: FitConfig) -> List[_Start]:
    omegas: Sequence[Optional[float]] = config.omega_grid if problem.lppl else (None,)
    starts = []
    for d in problem.offsets:
        for m in config.m_grid:
            for omega in omegas:
                sse = problem.sse(float(d), float(m), omega)
                starts.append(_Start(sse, float(d), float(m), omega or 0.0))
    return starts


def _best_distinct(starts: List[_Start], k: int) -> List[_Start]:
    """Lowest SSE first; ties broken by earlier t_c, then lower m (then lower omega)"""
    chosen: List[_Start] = []
    seen = set()
    for start in sorted(s for s in starts if math.isfinite(s.sse)):
        key = (start.d, start.m, start.omega)
        if key in seen:
            continue
        seen.add(key)
        chosen.append(start)
        if len(chosen) == k:
            break
    return chosen


def _refine(problem: _Problem, start: _Start, rng: np.random.Generator) -> Tuple[_Start, bool]:
    config = problem.config
    x0 = problem.to_coords(start)
    if config.restart_jitter > 0:
        x0 = x0 + config.restart_jitter * np.abs(x0) * rng.uniform(-1.0, 1.0, size=x0.shape)
    x0 = problem.clip(x0)

    result = minimize(
        problem.objective,
        x0,
        method="Nelder-Mead",
        bounds=problem.bounds,
        options={
            "maxiter": config.refine_max_iter,
            "xatol": 1e-7,
            "fatol": config.refine_tol,
            "initial_simplex": problem.initial_simplex(x0),
        },
    )

    # Never worse than the grid point it started from
    if not math.isfinite(result.fun) or result.fun > start.sse:
        return start, False

    d, m, omega = problem.from_coords(problem.clip(result.x))
    sse = problem.sse(d, m, omega)
    if sse > start.sse:
        return start, False
    return _Start(sse, d, m, omega or 0.0), bool(result.success)


def _calibrate(log_series: LogPriceSeries, config: FitConfig, model: ModelName,
               extra_starts: Sequence[Tuple[float, float]] = ()) -> FitResult:
    config.validate()
    if len(log_series) < config.min_length:
        raise TooShort(
            f"Window has {len(log_series)} observations, calibration needs {config.min_length}"
        )
    if np.ptp(log_series.y) == 0:
        raise DegenerateDesign("Log price is constant over the window")

    lppl = model == "lppl"
    problem = _Problem(log_series, config, lppl)

    starts = _grid_starts(problem, config)
    for d, m in extra_starts:
        for omega in config.omega_grid:
            starts.append(_Start(problem.sse(d, m, omega), d, m, omega))

    best_starts = _best_distinct(starts, config.n_refine)
    if not best_starts:
        raise NoFit(f"All {len(starts)} {model} starts failed on {log_series.label}")
    logger.debug(
        "%s grid on %s: %d starts, best sse=%.6g at t_c=%.3f m=%.3f",
        model, log_series.label, len(starts), best_starts[0].sse,
        log_series.t_end + best_starts[0].d, best_starts[0].m,
    )

    rng = np.random.default_rng(config.seed)
    outcomes = []
    refined = []
    for start in best_starts:
        final, converged = _refine(problem, start, rng)
        outcomes.append((final, converged))
        refined.append(RefinedStart(
            t_c=log_series.t_end + final.d,
            m=final.m,
            omega=final.omega if lppl else None,
            sse=final.sse,
            start_sse=start.sse,
            converged=converged,
        ))

    best, converged = min(outcomes, key=lambda o: (o[0].sse, o[0].d, o[0].m, o[0].omega))
    coef, sse = _profile(problem.back, problem.y, best.d, best.m, best.omega if lppl else None)

    t_c = log_series.t_end + best.d
    if lppl:
        params: Union[PowerLawFTSParams, LPPLParams] = LPPLParams(
            A=coef[0], B=coef[1], t_c=t_c, m=best.m, C1=coef[2], C2=coef[3], omega=best.omega,
        )
    else:
        params = PowerLawFTSParams(A=coef[0], B=coef[1], t_c=t_c, m=best.m)

    _, null_sse = fit_exponential(log_series)
    m_lo, m_hi = config.m_bounds
    m_at_bound = best.m <= m_lo + 1e-6 or best.m >= m_hi - 1e-6
    if m_at_bound:
        logger.debug("%s fit on %s stopped at the m bound (m=%.4f)", model, log_series.label, best.m)

    return FitResult(
        model=model,
        params=params,
        sse=sse,
        n_obs=len(log_series),
        null_sse=null_sse,
        sse_ratio=_sse_ratio(sse, null_sse),
        converged=converged,
        starts_explored=len(starts),
        t_end=log_series.t_end,
        tc_horizon=log_series.t_end + problem.d_max,
        m_at_bound=m_at_bound,
        refined=tuple(refined),
    )


def _sse_ratio(sse: float, null_sse: float) -> float:
    # A null that already fits exactly leaves nothing to improve on
    if null_sse <= 0:
        return 1.0
    return sse / null_sse


def fit_fts(log_series: LogPriceSeries, config: Optional[FitConfig] = None) -> FitResult:
    """Calibrate A + B (t_c - t)^m on a log-price window"""
    return _calibrate(log_series, config or FitConfig(), "fts")


def fit_lppl(log_series: LogPriceSeries, config: Optional[FitConfig] = None,
             fts_seed: Optional[FitResult] = None) -> FitResult:
    """
    Calibrate the LPPL model on a log-price window.

    The search also starts from the power-law optimum combined with every grid
    omega, so the LPPL fit is never worse than the FTS fit on the same window.
    """
    config = config or FitConfig()
    if fts_seed is None:
        fts_seed = fit_fts(log_series, config)
    seed_start = (fts_seed.params.t_c - log_series.t_end, fts_seed.params.m)
    return _calibrate(log_series, config, "lppl", extra_starts=[seed_start])


def compare_to_null(fit: FitResult, horizon: Optional[float] = None) -> ModelComparison:
    """
    Compare a fit with the exponential null.

    Args:
        fit: calibrated model
        horizon: latest acceptable t_c; defaults to the fit's search horizon
    """
    horizon = fit.tc_horizon if horizon is None else horizon
    p = fit.params
    shape_ok = p.B < 0 and 0 < p.m < 1 and fit.t_end < p.t_c <= horizon
    return ModelComparison(
        sse_ratio=fit.sse_ratio,
        relative_improvement=1.0 - fit.sse_ratio,
        bubble_shape_ok=bool(shape_ok),
    )


def model_curve(fit: FitResult, times) -> np.ndarray:
    """Fitted log price at the given times"""
    if isinstance(fit.params, LPPLParams):
        return np.asarray(eval_lppl_log_price(fit.params, times))
    return np.asarray(eval_fts_log_price(fit.params, times))
