from .config import AppConfig
from .errors import (
    BeyondSingularity,
    BubbleScopeError,
    DegenerateDesign,
    DegenerateSample,
    InputError,
    InvalidParameter,
    MalformedCSV,
    MalformedPrice,
    NoCrashes,
    NoFit,
    NonMonotonicTime,
    OutputError,
    TooFewDrawdowns,
    TooShort,
)

__all__ = [
    "AppConfig",
    "BeyondSingularity",
    "BubbleScopeError",
    "DegenerateDesign",
    "DegenerateSample",
    "InputError",
    "InvalidParameter",
    "MalformedCSV",
    "MalformedPrice",
    "NoCrashes",
    "NoFit",
    "NonMonotonicTime",
    "OutputError",
    "TooFewDrawdowns",
    "TooShort",
]
