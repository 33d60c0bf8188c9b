"""Nash bargaining between a broker and a Kelly/CRRA client.

The closed-form solution lives in :func:`solve_nash`; :func:`oracle_solve`
maximises the Nash product by brute-force grid refinement and shares nothing
with it except the growth and profit functionals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import CornerError, NumericalError, ThreatDominatesError, UnsupportedError
from .market import (
    AgentParams,
    Contract,
    MarketParams,
    Outcome,
    growth_rate,
    growth_rates,
    optimal_bet,
    outcome,
    profit_rate,
    quadratic_forms,
    validate,
)

EGALITARIAN_TOL = 1e-10


@dataclass(frozen=True)
class ThreatPoint:
    """Disagreement payoffs: broker profit rate and client growth rate."""

    profit: float
    growth: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.profit) and math.isfinite(self.growth)):
            raise ValueError("threat point must be finite")


@dataclass(frozen=True)
class BargainSolution:
    contract: Contract
    outcome: Outcome
    threat: ThreatPoint

    @property
    def surplus_gambler(self) -> float:
        return self.outcome.growth - self.threat.growth

    @property
    def surplus_broker(self) -> float:
        return self.outcome.profit - self.threat.profit


@dataclass(frozen=True)
class FrontierLine:
    """Efficient profit-growth frontier ``growth = intercept + slope * profit``."""

    intercept: float
    slope: float = -1.0

    def growth_at(self, profit: float) -> float:
        return self.intercept + self.slope * profit


def nash_product(
    market: MarketParams, agent: AgentParams, contract: Contract, threat: ThreatPoint
) -> float:
    """``(profit - profit_bar) * (growth - growth_bar)``; negative outside the gain region."""
    return (profit_rate(contract, agent) - threat.profit) * (
        growth_rate(market, agent, contract) - threat.growth
    )


def breakdown_threat(market: MarketParams, agent: AgentParams) -> ThreatPoint:
    """Threat point when negotiations collapse and no loan is made.

    The client holds the best unlevered portfolio (weights summing to one),
    found from the equality-constrained quadratic program in closed form.
    """
    ones = np.ones(market.n)
    s_inv_ones = market.solve(ones)
    s_inv_mu = market.solve(market.mu)
    lam = (ones @ s_inv_mu - agent.gamma) / (ones @ s_inv_ones)
    b = (s_inv_mu - lam * s_inv_ones) / agent.gamma
    # sum(b) == 1, so the loan rate drops out of the growth functional
    growth = growth_rate(market, agent, Contract(b, agent.r))
    return ThreatPoint(profit=0.0, growth=growth)


def efficient_frontier(market: MarketParams, agent: AgentParams) -> FrontierLine:
    forms = quadratic_forms(market, agent)
    return FrontierLine(intercept=agent.r + 0.5 * forms.excess(agent.r))


def negotiated_rate(market: MarketParams, agent: AgentParams, threat: ThreatPoint) -> float:
    """Nash-bargained loan rate for an arbitrary threat point."""
    forms = quadratic_forms(market, agent)
    r = agent.r
    # forms already carry the 1/gamma factor of the CRRA case
    q_star = forms.ones_mu - r * forms.ones_ones - 1.0
    numer = forms.mu_mu - r * r * forms.ones_ones - 2.0 * (threat.growth - threat.profit)
    return r / 2.0 + numer / (4.0 * q_star)


def final_utilities(
    market: MarketParams, agent: AgentParams, threat: ThreatPoint
) -> tuple[float, float]:
    """Closed-form ``(profit, growth)`` at the bargain.

    Raises the same typed failures as :func:`solve_nash`.
    """
    _check_gain_region(market, agent, threat)
    quarter = 0.25 * quadratic_forms(market, agent).excess(agent.r)
    gap = threat.growth - threat.profit
    profit = (agent.r - gap) / 2.0 + quarter
    growth = (agent.r + gap) / 2.0 + quarter
    return profit, growth


def _check_gain_region(market: MarketParams, agent: AgentParams, threat: ThreatPoint) -> None:
    check = validate(market, agent)
    if not check.borrows:
        raise CornerError(check.warnings[0])
    frontier = efficient_frontier(market, agent)
    total = frontier.growth_at(threat.profit) - threat.growth
    if not total > 0.0:
        raise ThreatDominatesError(f"joint surplus {total:.6g} is not positive")


def solve_nash(market: MarketParams, agent: AgentParams, threat: ThreatPoint) -> BargainSolution:
    """Nash bargaining solution in closed form.

    The client bets as if borrowing at the call rate; the loan rate splits
    the surplus equally. The outcome is re-evaluated through the growth and
    profit functionals, never through the shortcut utility formulas.

    Raises
    ------
    CornerError
        The client would not borrow even at the call rate.
    ThreatDominatesError
        No contract improves on the threat point for both sides.
    """
    _check_gain_region(market, agent, threat)
    b_star = optimal_bet(market, agent, agent.r)
    contract = Contract(b_star, negotiated_rate(market, agent, threat))
    result = outcome(market, agent, contract)
    sol = BargainSolution(contract, result, threat)

    if not (sol.surplus_gambler > 0.0 and sol.surplus_broker > 0.0):
        raise ThreatDominatesError(
            f"surpluses {sol.surplus_gambler:.3g}, {sol.surplus_broker:.3g}"
        )
    gap = abs(sol.surplus_gambler - sol.surplus_broker)
    if not gap <= EGALITARIAN_TOL:
        raise NumericalError(f"egalitarian split violated by {gap:.3e}")
    return sol


def rule_of_thumb_rate(market: MarketParams, agent: AgentParams) -> float:
    """Negotiated rate against a total breakdown, one asset, log utility.

    ``(mu + 3r - sigma^2) / 4``, i.e. three parts call rate to one part
    ``nu - sigma^2/2``.
    """
    if market.n != 1 or agent.gamma != 1.0:
        raise UnsupportedError("rule of thumb needs a single asset and gamma = 1")
    mu = float(market.mu[0])
    var = float(market.sigma[0, 0])
    return (mu + 3.0 * agent.r - var) / 4.0


# --------------------------------------------------------------------------
# Grid-refinement oracle


@dataclass(frozen=True)
class OracleConfig:
    """Search settings for :func:`oracle_solve`.

    The search runs over the weights ``b`` and the broker's profit rate
    ``pi``; the loan rate is recovered as ``r + pi / q``. In these
    coordinates the client's growth is concave in ``b`` and linear in
    ``pi``, so the gain region is not a thin diagonal ridge.

    The initial box puts every weight in ``[b_low, b_high] * scale``, where
    ``scale`` is the largest single-asset Merton fraction, and the profit in
    ``[max(0, profit_bar), max(0, profit_bar) + profit_span * scale * max(mu_i - r)]``.
    Each round lays a tensor grid of ``points`` per axis over the box and
    recentres a box of ``keep`` grid spacings either side of the
    incumbent. A box whose incumbent lands on a soft edge is translated
    instead of shrunk.
    """

    points: int | None = None
    keep: float = 3.0
    b_low: float = -5.0
    b_high: float = 10.0
    profit_span: float = 2.0
    tol: float = 1e-10
    max_rounds: int = 200
    budget: int = 200_000

    def points_for(self, dim: int) -> int:
        if self.points is not None:
            return self.points
        m = int(self.budget ** (1.0 / dim))
        m = min(m, 101)
        return max(m - (m + 1) % 2, 7)  # odd, so the centre is a grid point


def _nash_surface(
    market: MarketParams,
    agent: AgentParams,
    threat: ThreatPoint,
    b: NDArray[np.float64],
    profit: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Nash product (``-inf`` outside the gain region), the smallest of ``q``
    and the two surpluses, and the total surplus."""
    q = b.sum(axis=-1) - 1.0
    lending = q > 0.0
    rL = agent.r + profit / np.where(lending, q, 1.0)
    gain_broker = profit - threat.profit
    gain_client = growth_rates(market, agent, b, rL) - threat.growth
    margin = np.where(lending, np.minimum(q, np.minimum(gain_broker, gain_client)), q)
    value = np.where(margin > 0.0, gain_broker * gain_client, -np.inf)
    return value, margin, np.where(lending, gain_broker + gain_client, -np.inf)


def oracle_solve(
    market: MarketParams,
    agent: AgentParams,
    threat: ThreatPoint,
    search: OracleConfig | None = None,
) -> Contract:
    """Maximise the Nash product by iterated tensor-grid refinement.

    Axes are the ``n`` portfolio weights and the broker's profit rate, with
    ``rL = r + pi / q``. The Nash product is evaluated through the growth
    and profit functionals only. Ties keep the first grid point in C order,
    so results are deterministic.

    Raises
    ------
    ThreatDominatesError
        If the search never reaches the gain region. Until it does, rounds
        maximise the smallest of ``q`` and the two surpluses instead, with
        ties going to the larger total surplus.
    """
    search = search or OracleConfig()
    market.cholesky
    n = market.n
    dim = n + 1
    m = search.points_for(dim)

    diag = np.diag(market.sigma)
    scale = max(1.0, float(np.max(np.abs(market.mu - agent.r) / (agent.gamma * diag))))
    top_excess = max(float(np.max(market.mu)) - agent.r, 1e-4)
    floor = max(0.0, threat.profit)
    lo = np.r_[np.full(n, search.b_low * scale), floor]
    hi = np.r_[np.full(n, search.b_high * scale), floor + search.profit_span * scale * top_excess]
    # rL >= r, i.e. pi >= 0, is the only hard constraint
    hard_lo = np.r_[np.full(n, -np.inf), 0.0]

    best: NDArray[np.float64] | None = None
    found = False
    for _ in range(search.max_rounds):
        axes = [np.linspace(lo[k], hi[k], m) for k in range(dim)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        values, margin, total = _nash_surface(market, agent, threat, mesh[:, :n], mesh[:, n])
        idx = int(np.argmax(values))
        if np.isfinite(values[idx]):
            found = True
        elif found:
            break
        else:
            # no feasible point yet: climb towards the gain region first,
            # breaking ties in the margin by total surplus
            top = margin == margin.max()
            idx = int(np.argmax(np.where(top, total, -np.inf)))
        best = mesh[idx]
        spacing = (hi - lo) / (m - 1)
        if np.all(spacing < search.tol):
            break

        pos = np.unravel_index(idx, (m,) * dim)
        half = search.keep * spacing
        new_lo, new_hi = best - half, best + half
        for k in range(dim):
            on_low = pos[k] == 0 and lo[k] > hard_lo[k]
            on_high = pos[k] == m - 1
            if on_low or on_high:
                # translate: keep the width, centre on the incumbent
                width = hi[k] - lo[k]
                new_lo[k], new_hi[k] = best[k] - width / 2, best[k] + width / 2
        lo = np.maximum(new_lo, hard_lo)
        hi = new_hi

    if not found:
        raise ThreatDominatesError("grid search found no point in the gain region")
    assert best is not None
    b = best[:n]
    return Contract(b, float(agent.r + best[n] / (b.sum() - 1.0)))
