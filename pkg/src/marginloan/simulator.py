"""Monte Carlo wealth paths under a fixed margin loan contract.

Log wealth is stepped with the exact log-normal transition, so the step size
never biases the growth estimate. Path ``i`` draws from its own PCG64 stream
seeded by ``SeedSequence(seed, spawn_key=(i,))``; results therefore do not
depend on how paths are scheduled across threads, and every contract passed
to :func:`compare_contracts` sees the same shocks (common random numbers).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidParameterError
from .market import AgentParams, Contract, MarketParams, profit_rate


@dataclass(frozen=True)
class SimConfig:
    horizon_years: float
    dt_years: float
    n_paths: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.horizon_years > 0 and math.isfinite(self.horizon_years)):
            raise InvalidParameterError("horizon_years must be positive")
        if not (0 < self.dt_years <= self.horizon_years):
            raise InvalidParameterError("dt_years must be in (0, horizon_years]")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise InvalidParameterError("n_paths must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError("seed must be an unsigned 64-bit integer")

    def steps(self) -> NDArray[np.float64]:
        """Step lengths; the last one is shortened if ``dt`` does not divide the horizon."""
        n_full = int(math.floor(self.horizon_years / self.dt_years * (1 + 1e-12)))
        rest = self.horizon_years - n_full * self.dt_years
        dts = np.full(n_full, self.dt_years)
        if rest > 1e-12 * self.horizon_years:
            dts = np.append(dts, rest)
        return dts


@dataclass(frozen=True, eq=False)
class SimResult:
    terminal_log_growth: NDArray[np.float64]
    mean_growth: float
    stderr_growth: float
    mean_broker_income_rate: float
    mean_discounted_income: float

    @property
    def n_paths(self) -> int:
        return int(self.terminal_log_growth.size)


def path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def asset_shocks(
    market: MarketParams, dts: NDArray[np.float64], rng: np.random.Generator
) -> NDArray[np.float64]:
    """Correlated Brownian increments, shape ``(steps, n)``."""
    z = rng.standard_normal((dts.size, market.n))
    return (z @ market.cholesky.T) * np.sqrt(dts)[:, None]


def log_increments(
    market: MarketParams, contract: Contract, dts: NDArray[np.float64], shocks: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Per-step change in log wealth.

    Wealth always follows the log-utility drift ``rL + (mu - rL 1)'b - b'Sb/2``;
    risk aversion only enters welfare, not the dynamics.
    """
    b = contract.b
    drift = contract.rL + (market.mu - contract.rL) @ b - 0.5 * (b @ market.sigma @ b)
    return drift * dts + shocks @ b


def _run_path(
    market: MarketParams,
    agent: AgentParams,
    contracts: Sequence[Contract],
    dts: NDArray[np.float64],
    seed: int,
    index: int,
) -> NDArray[np.float64]:
    shocks = asset_shocks(market, dts, path_rng(seed, index))
    horizon = float(dts.sum())
    t_start = np.concatenate(([0.0], np.cumsum(dts)[:-1]))
    out = np.empty((len(contracts), 3))
    for k, contract in enumerate(contracts):
        log_v = np.cumsum(log_increments(market, contract, dts, shocks))
        # income accrues on equity at the start of each step
        log_v_start = np.concatenate(([0.0], log_v[:-1]))
        pi = profit_rate(contract, agent)
        weights = np.exp(log_v_start - log_v_start.max()) * dts
        income_rate = float(np.sum(pi * weights) / np.sum(weights))
        discounted = float(np.sum(pi * np.exp(log_v_start - agent.r * t_start) * dts))
        out[k] = (log_v[-1] / horizon, income_rate, discounted)
    return out


def compare_contracts(
    market: MarketParams,
    agent: AgentParams,
    contracts: Sequence[Contract],
    config: SimConfig,
    workers: int = 1,
) -> list[SimResult]:
    """Simulate several contracts on identical shocks, one result per contract."""
    if not contracts:
        raise InvalidParameterError("need at least one contract")
    market.cholesky
    dts = config.steps()

    def run(i: int) -> NDArray[np.float64]:
        return _run_path(market, agent, contracts, dts, config.seed, i)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, range(config.n_paths)))
    else:
        rows = [run(i) for i in range(config.n_paths)]
    stacked = np.stack(rows, axis=1)  # (contract, path, field)

    results = []
    for per_contract in stacked:
        growth = per_contract[:, 0].copy()
        growth.flags.writeable = False
        n = growth.size
        stderr = float(growth.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        results.append(
            SimResult(
                terminal_log_growth=growth,
                mean_growth=float(growth.mean()),
                stderr_growth=stderr,
                mean_broker_income_rate=float(per_contract[:, 1].mean()),
                mean_discounted_income=float(per_contract[:, 2].mean()),
            )
        )
    return results


def simulate(
    market: MarketParams,
    agent: AgentParams,
    contract: Contract,
    config: SimConfig,
    workers: int = 1,
) -> SimResult:
    return compare_contracts(market, agent, [contract], config, workers)[0]


def paired_difference(a: SimResult, b: SimResult) -> tuple[float, float]:
    """Mean and standard error of the per-path growth difference ``a - b``."""
    diff = a.terminal_log_growth - b.terminal_log_growth
    if diff.size < 2:
        return float(diff.mean()), 0.0
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(diff.size))
