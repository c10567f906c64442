from .plot_data import write_plot_data
from .scan import (
    BubbleReport,
    CrashPrecedence,
    NullFit,
    ScanConfig,
    WindowDiagnosis,
    classify_window,
    precedence_rate,
    scan,
)
from .signatures import MomentumSignature, momentum_reversal

__all__ = [
    "BubbleReport",
    "CrashPrecedence",
    "MomentumSignature",
    "NullFit",
    "ScanConfig",
    "WindowDiagnosis",
    "classify_window",
    "momentum_reversal",
    "precedence_rate",
    "scan",
    "write_plot_data",
]
