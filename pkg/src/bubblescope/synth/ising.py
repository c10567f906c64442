"""
Mean-field Ising herding market.

Each agent holds a stance of +1 (buy) or -1 (sell). During a sweep agents
update one at a time, in shuffled order, to the sign of
``K * magnetization + sigma_noise * eps_i`` (ties go to +1), where eps_i is
uniform on [-1, 1]. After every sweep the log price moves by
``magnetization / lambda_liquidity``.

With uniform noise the ordering threshold of the mean-field dynamics is
K = sigma_noise: below it the magnetization fluctuates around zero, above it
the agents lock into a common stance.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..series.models import PriceSeries
from ..utils.errors import InvalidParameter

logger = logging.getLogger(__name__)


class IsingMarketParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_agents: int = Field(ge=2)
    K: float = Field(ge=0)
    sigma_noise: float = Field(gt=0)
    lambda_liquidity: float = Field(gt=0)
    n_steps: int = Field(ge=1)
    # Linear ramp (K_start, K_end) over the run; overrides K when set
    K_schedule: Optional[Tuple[float, float]] = None
    p0: float = Field(default=100.0, gt=0)


@dataclass(frozen=True)
class IsingState:
    """Agent stances and the log price they have driven so far"""
    spins: np.ndarray
    magnetization: float
    logp: float

    @classmethod
    def from_spins(cls, spins: Sequence[int], logp: float) -> 'IsingState':
        array = np.asarray(spins, dtype=np.int8)
        if not np.all(np.abs(array) == 1):
            raise InvalidParameter("Every spin must be -1 or +1")
        array.setflags(write=False)
        return cls(spins=array, magnetization=int(array.sum(dtype=np.int64)) / len(array), logp=logp)


def coupling_at(params: IsingMarketParams, step: int) -> float:
    """Coupling used for sweep ``step`` (0-based)"""
    if params.K_schedule is None:
        return params.K
    start, end = params.K_schedule
    return start + (end - start) * step / max(params.n_steps - 1, 1)


def initial_ising_state(n_agents: int, rng: np.random.Generator, logp: float,
                        mirror: bool = False) -> IsingState:
    spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=n_agents)
    if mirror:
        spins = -spins
    return IsingState.from_spins(spins, logp)


def ising_sweep(state: IsingState, params: IsingMarketParams, noise_draws: Sequence[float],
                order: Optional[Sequence[int]] = None, K: Optional[float] = None) -> IsingState:
    """
    One asynchronous sweep over all agents, then one price step.

    The returned state carries ``logp + magnetization / lambda_liquidity``
    with the magnetization reached at the end of the sweep.

    Args:
        state: current spins and log price
        params: market parameters
        noise_draws: one symmetric deviate per agent, indexed by agent
        order: update order; defaults to agent index order
        K: coupling override (ramps); defaults to params.K
    """
    n = len(state.spins)
    if len(noise_draws) != n:
        raise InvalidParameter(f"Expected {n} noise draws, got {len(noise_draws)}")
    coupling = params.K if K is None else K
    sigma = params.sigma_noise

    spins = state.spins.astype(int).tolist()
    eps = np.asarray(noise_draws, dtype=float).tolist()
    sequence = range(n) if order is None else np.asarray(order, dtype=int).tolist()

    # Integer total keeps the magnetization exact and mirror-symmetric
    total = sum(spins)
    for i in sequence:
        field = coupling * total / n + sigma * eps[i]
        new = 1 if field >= 0 else -1
        total += new - spins[i]
        spins[i] = new

    magnetization = total / n
    return IsingState.from_spins(spins, state.logp + magnetization / params.lambda_liquidity)


def gen_ising_market(params: IsingMarketParams, seed: Optional[int] = None,
                     mirror: bool = False, label: str = "ising") -> Tuple[PriceSeries, np.ndarray]:
    """
    Simulate the herding market.

    ``mirror=True`` negates the initial spins and every noise draw while
    consuming the same random stream, which negates the magnetization trace.

    Returns:
        (price series with n_steps + 1 points, magnetization after each sweep)
    """
    rng = np.random.default_rng(seed)
    logp0 = math.log(params.p0)
    state = initial_ising_state(params.n_agents, rng, logp0, mirror)

    trace = np.empty(params.n_steps)
    logp = np.empty(params.n_steps + 1)
    logp[0] = state.logp
    for step in range(params.n_steps):
        order = rng.permutation(params.n_agents)
        noise = rng.uniform(-1.0, 1.0, params.n_agents)
        if mirror:
            noise = -noise
        state = ising_sweep(state, params, noise, order, coupling_at(params, step))
        trace[step] = state.magnetization
        logp[step + 1] = state.logp

    logger.debug("Ising run: %d sweeps, final magnetization %.3f", params.n_steps, trace[-1])
    prices = np.exp(logp)
    series = PriceSeries(times=np.arange(params.n_steps + 1), prices=prices, label=label)
    return series, trace
