from .calibrate import (
    FitConfig,
    FitResult,
    ModelComparison,
    RefinedStart,
    compare_to_null,
    fit_fts,
    fit_lppl,
    model_curve,
    profile_linear,
)
from .functions import (
    annualized_growth,
    eval_exponential_log_price,
    eval_feedback_price,
    eval_fts_log_price,
    eval_lppl_log_price,
    fit_exponential,
)
from .params import ExpFitParams, FeedbackODEParams, LPPLParams, PowerLawFTSParams

__all__ = [
    "ExpFitParams",
    "FeedbackODEParams",
    "FitConfig",
    "FitResult",
    "LPPLParams",
    "ModelComparison",
    "PowerLawFTSParams",
    "RefinedStart",
    "annualized_growth",
    "compare_to_null",
    "eval_exponential_log_price",
    "eval_feedback_price",
    "eval_fts_log_price",
    "eval_lppl_log_price",
    "fit_exponential",
    "fit_fts",
    "fit_lppl",
    "model_curve",
    "profile_linear",
]
