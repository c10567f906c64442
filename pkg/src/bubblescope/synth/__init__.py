from .generators import (
    GBMParams,
    append_crash,
    gen_feedback,
    gen_fts,
    gen_gbm,
    integrate_feedback,
)
from .ising import (
    IsingMarketParams,
    IsingState,
    coupling_at,
    gen_ising_market,
    initial_ising_state,
    ising_sweep,
)

__all__ = [
    "GBMParams",
    "IsingMarketParams",
    "IsingState",
    "append_crash",
    "coupling_at",
    "gen_feedback",
    "gen_fts",
    "gen_gbm",
    "gen_ising_market",
    "initial_ising_state",
    "ising_sweep",
    "integrate_feedback",
]
