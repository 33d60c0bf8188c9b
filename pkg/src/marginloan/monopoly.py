"""Monopoly benchmark: the broker posts a rate, the client picks its Kelly bet.

All quantities are per dollar of client equity and per year. In the
multi-asset case everything runs through the aggregate loan quantity
``q = 1'b - 1``, whose demand is linear in the posted rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .bargaining import ThreatPoint
from .errors import InvalidParameterError, NonviableMarketError
from .market import (
    AgentParams,
    Contract,
    MarketParams,
    growth_rate,
    optimal_bet,
    profit_rate,
    quadratic_forms,
)

VIABILITY_RTOL = 1e-12


@dataclass(frozen=True)
class DemandCurve:
    """Linear loan demand ``q(rL) = intercept_q + slope_q * rL``."""

    intercept_q: float
    slope_q: float

    @property
    def choke_rate(self) -> float:
        return self.intercept_q / -self.slope_q

    def quantity(self, rL: float) -> float:
        return self.intercept_q + self.slope_q * rL

    def marginal_value(self, q: float) -> float:
        """Inverse demand: the rate at which the client wants exactly ``q``."""
        return (q - self.intercept_q) / self.slope_q


@dataclass(frozen=True, eq=False)
class MonopolyReport:
    demand: DemandCurve
    q_m: float
    r_m: float
    b_m: NDArray[np.float64]
    profit_m: float
    growth_m: float
    consumer_surplus: float
    deadweight_loss: float

    @property
    def contract(self) -> Contract:
        return Contract(self.b_m, self.r_m)


def demand_curve(market: MarketParams, agent: AgentParams) -> DemandCurve:
    forms = quadratic_forms(market, agent)
    return DemandCurve(intercept_q=forms.ones_mu - 1.0, slope_q=-forms.ones_ones)


def elasticity(market: MarketParams, agent: AgentParams, q: float) -> float:
    """Price elasticity of loan demand at quantity ``q > 0``."""
    if not q > 0.0:
        raise InvalidParameterError(f"elasticity needs q > 0, got {q!r}")
    return demand_curve(market, agent).intercept_q / q - 1.0


def monopoly_solution(market: MarketParams, agent: AgentParams) -> MonopolyReport:
    """Profit-maximising posted rate and everything that follows from it.

    Raises
    ------
    NonviableMarketError
        If the choke rate does not strictly exceed the call rate.
    """
    demand = demand_curve(market, agent)
    r = agent.r
    choke = demand.choke_rate
    if not choke - r > VIABILITY_RTOL * max(1.0, abs(r)):
        raise NonviableMarketError(f"choke rate {choke:.6g} <= call rate {r:.6g}")

    # marginal revenue equals marginal cost r
    q_m = demand.quantity(r) / 2.0
    r_m = demand.marginal_value(q_m)
    b_m = optimal_bet(market, agent, r_m)
    contract = Contract(b_m, r_m)
    q_competitive = demand.quantity(r)
    return MonopolyReport(
        demand=demand,
        q_m=q_m,
        r_m=r_m,
        b_m=b_m,
        profit_m=profit_rate(contract, agent),
        growth_m=growth_rate(market, agent, contract),
        consumer_surplus=0.5 * q_m * (choke - r_m),
        deadweight_loss=0.5 * (q_competitive - q_m) * (r_m - r),
    )


def monopoly_threat(market: MarketParams, agent: AgentParams) -> ThreatPoint:
    report = monopoly_solution(market, agent)
    return ThreatPoint(profit=report.profit_m, growth=report.growth_m)
