"""Market and agent parameters plus the growth and profit functionals.

Everything here is a pure function of immutable inputs. Rates are
continuously compounded per year unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidCovarianceError, InvalidParameterError

SYMMETRY_RTOL = 1e-12
PIVOT_RTOL = 1e-10


def _frozen_array(x: ArrayLike, ndim: int, name: str) -> NDArray[np.float64]:
    arr = np.array(x, dtype=np.float64)
    if arr.ndim == 0 and ndim == 1:
        arr = arr.reshape(1)
    elif arr.ndim == 0 and ndim == 2:
        arr = arr.reshape(1, 1)
    if arr.ndim != ndim:
        raise InvalidParameterError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


def apr_to_cc(apr: float) -> float:
    """Convert an annually compounded rate to its continuously compounded twin."""
    if not apr > -1.0:
        raise InvalidParameterError(f"annual rate must exceed -100%, got {apr!r}")
    return math.log1p(apr)


def cc_to_apr(rate: float) -> float:
    return math.expm1(rate)


@dataclass(frozen=True, eq=False)
class MarketParams:
    """Drift vector and covariance matrix of ``n`` risky assets.

    Parameters
    ----------
    mu : (n,) per-year drifts of the instantaneous returns
    sigma : (n, n) per-year covariance of instantaneous returns

    Construction only checks shapes and finiteness. Symmetry and positive
    definiteness are checked lazily by :attr:`cholesky` (and by
    :func:`validate`), so a bad matrix can still be inspected.
    """

    mu: NDArray[np.float64]
    sigma: NDArray[np.float64]

    def __post_init__(self) -> None:
        mu = _frozen_array(self.mu, 1, "mu")
        sigma = _frozen_array(self.sigma, 2, "sigma")
        if mu.size < 1:
            raise InvalidParameterError("need at least one asset")
        if sigma.shape != (mu.size, mu.size):
            raise InvalidParameterError(
                f"dimension mismatch: mu has {mu.size} entries, sigma is {sigma.shape}"
            )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def univariate(cls, nu: float, vol: float) -> MarketParams:
        """One asset described by its geometric growth rate ``nu`` and volatility."""
        return cls(mu=[nu + 0.5 * vol * vol], sigma=[[vol * vol]])

    @property
    def n(self) -> int:
        return int(self.mu.size)

    @property
    def nu(self) -> NDArray[np.float64]:
        """Per-asset geometric growth rates ``mu_i - sigma_ii / 2``."""
        return self.mu - 0.5 * np.diag(self.sigma)

    @property
    def is_symmetric(self) -> bool:
        scale = max(float(np.max(np.abs(self.sigma))), np.finfo(float).tiny)
        return bool(np.max(np.abs(self.sigma - self.sigma.T)) <= SYMMETRY_RTOL * scale)

    @cached_property
    def cholesky(self) -> NDArray[np.float64]:
        """Lower Cholesky factor of ``sigma``; raises on asymmetric or non-PD input."""
        if not self.is_symmetric:
            raise InvalidCovarianceError("matrix is not symmetric")
        try:
            chol = np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError:
            raise InvalidCovarianceError("matrix is not positive definite") from None
        pivots = np.diag(chol) ** 2
        largest = float(np.max(np.diag(self.sigma)))
        if not np.all(pivots > PIVOT_RTOL * largest):
            raise InvalidCovarianceError(
                f"smallest Cholesky pivot {pivots.min():.3e} below tolerance"
            )
        chol.flags.writeable = False
        return chol

    def solve(self, x: ArrayLike) -> NDArray[np.float64]:
        """Return ``sigma^{-1} x`` through the Cholesky factor."""
        chol = self.cholesky
        y = np.linalg.solve(chol, np.asarray(x, dtype=np.float64))
        return np.linalg.solve(chol.T, y)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MarketParams):
            return NotImplemented
        return np.array_equal(self.mu, other.mu) and np.array_equal(self.sigma, other.sigma)

    def __hash__(self) -> int:
        return hash((self.mu.tobytes(), self.sigma.tobytes()))

    def __repr__(self) -> str:
        return f"MarketParams(mu={self.mu.tolist()}, sigma={self.sigma.tolist()})"


@dataclass(frozen=True)
class AgentParams:
    """Broker call rate ``r`` and the client's relative risk aversion ``gamma``.

    ``gamma = 1`` is the log-utility (Kelly) client.
    """

    r: float
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and self.r >= 0.0):
            raise InvalidParameterError(f"call rate must be finite and >= 0, got {self.r!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise InvalidParameterError(f"gamma must be > 0, got {self.gamma!r}")


@dataclass(frozen=True, eq=False)
class Contract:
    """A margin loan arrangement: portfolio weights ``b`` and loan rate ``rL``."""

    b: NDArray[np.float64]
    rL: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "b", _frozen_array(self.b, 1, "b"))
        if not math.isfinite(self.rL):
            raise InvalidParameterError("loan rate must be finite")
        object.__setattr__(self, "rL", float(self.rL))

    @property
    def q(self) -> float:
        """Margin loans per dollar of client equity."""
        return float(np.sum(self.b) - 1.0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Contract):
            return NotImplemented
        return np.array_equal(self.b, other.b) and self.rL == other.rL

    def __repr__(self) -> str:
        return f"Contract(b={self.b.tolist()}, rL={self.rL!r})"


@dataclass(frozen=True)
class Outcome:
    growth: float
    profit: float
    q: float
    nim: float


@dataclass(frozen=True)
class Validation:
    """Diagnostics from :func:`validate`.

    ``leverage_statistic`` is ``1' sigma^{-1} (mu - r 1)``; the client borrows
    at the call rate only if it exceeds ``gamma``.
    """

    symmetric: bool
    positive_definite: bool
    leverage_statistic: float
    gamma: float
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def borrows(self) -> bool:
        return self.leverage_statistic > self.gamma

    @property
    def ok(self) -> bool:
        return self.symmetric and self.positive_definite and not self.warnings


def validate(market: MarketParams, agent: AgentParams) -> Validation:
    """Check the covariance (hard) and the willingness to borrow (soft).

    Raises
    ------
    InvalidCovarianceError
        If ``sigma`` is asymmetric or not positive definite.
    """
    market.cholesky  # raises on hard failure
    ones = np.ones(market.n)
    stat = float(ones @ market.solve(market.mu - agent.r * ones))
    warnings: tuple[str, ...] = ()
    if not stat > agent.gamma:
        warnings = (
            f"no-loan corner: 1'S^-1(mu - r1) = {stat:.6g} does not exceed gamma = {agent.gamma:g}",
        )
    return Validation(True, True, stat, agent.gamma, warnings)


def growth_rates(
    market: MarketParams, agent: AgentParams, b: ArrayLike, rL: ArrayLike
) -> NDArray[np.float64]:
    """Vectorised growth functional.

    ``b`` has shape ``(..., n)`` and ``rL`` broadcasts against ``b[..., 0]``.
    Returns ``rL + (mu - rL 1)'b - (gamma/2) b' sigma b`` elementwise.
    """
    b = np.asarray(b, dtype=np.float64)
    rL = np.asarray(rL, dtype=np.float64)
    quad = np.einsum("...i,ij,...j->...", b, market.sigma, b)
    exposure = b @ market.mu
    return rL * (1.0 - b.sum(axis=-1)) + exposure - 0.5 * agent.gamma * quad


def growth_rate(market: MarketParams, agent: AgentParams, contract: Contract) -> float:
    """Client's per-year growth rate (certainty-equivalent rate when gamma != 1)."""
    return float(growth_rates(market, agent, contract.b, contract.rL))


def profit_rate(contract: Contract, agent: AgentParams) -> float:
    """Broker profit per year per dollar of client equity, ``q (rL - r)``."""
    return contract.q * (contract.rL - agent.r)


def optimal_bet(market: MarketParams, agent: AgentParams, rL: float) -> NDArray[np.float64]:
    """Growth-optimal weights ``(1/gamma) sigma^{-1} (mu - rL 1)`` at posted rate ``rL``.

    Never clamped; a result with ``sum(b) <= 1`` means no loan is demanded.
    """
    return market.solve(market.mu - rL * np.ones(market.n)) / agent.gamma


def outcome(market: MarketParams, agent: AgentParams, contract: Contract) -> Outcome:
    q = contract.q
    nim = contract.rL - agent.r
    return Outcome(
        growth=growth_rate(market, agent, contract),
        profit=q * nim,
        q=q,
        nim=nim,
    )


@dataclass(frozen=True)
class QuadraticForms:
    """Scalars of the risk-adjusted precision matrix ``A = (gamma sigma)^{-1}``.

    ``ones_ones = 1'A1``, ``ones_mu = 1'A mu``, ``mu_mu = mu'A mu``.
    """

    ones_ones: float
    ones_mu: float
    mu_mu: float

    def excess(self, r: float) -> float:
        """``(mu - r1)'A(mu - r1)``."""
        return self.mu_mu - 2.0 * r * self.ones_mu + r * r * self.ones_ones


def quadratic_forms(market: MarketParams, agent: AgentParams) -> QuadraticForms:
    ones = np.ones(market.n)
    a_ones = market.solve(ones) / agent.gamma
    a_mu = market.solve(market.mu) / agent.gamma
    return QuadraticForms(
        ones_ones=float(ones @ a_ones),
        ones_mu=float(ones @ a_mu),
        mu_mu=float(market.mu @ a_mu),
    )
