import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marginloan import (
    AgentParams,
    Contract,
    InvalidCovarianceError,
    InvalidParameterError,
    MarketParams,
    apr_to_cc,
    growth_rate,
    optimal_bet,
    outcome,
    profit_rate,
    validate,
)
from marginloan.market import growth_rates
from scenarios import EXAMPLE_R, example_market, random_scenario

MU_EX = 0.10125
VAR_EX = 0.0225


def test_example_market_drift():
    m = example_market()
    assert m.mu[0] == pytest.approx(MU_EX, abs=1e-15)
    assert m.sigma[0, 0] == pytest.approx(VAR_EX, abs=1e-15)
    assert m.nu[0] == pytest.approx(0.09, abs=1e-15)


class TestValidate:
    def test_example_passes(self):
        v = validate(example_market(), AgentParams(EXAMPLE_R))
        assert v.ok and v.borrows
        assert v.leverage_statistic == pytest.approx((MU_EX - 0.03) / VAR_EX, rel=1e-12)
        assert round(v.leverage_statistic, 4) == 3.1667

    def test_zero_excess_drift_is_soft_warning(self):
        m = MarketParams([0.05], [[0.04]])
        v = validate(m, AgentParams(0.05))
        assert not v.borrows
        assert not v.ok
        assert v.warnings and "corner" in v.warnings[0]

    def test_two_assets_against_hand_inverse(self):
        s = np.array([[0.04, 0.01], [0.01, 0.09]])
        mu = np.array([0.10, 0.08])
        r = 0.03
        det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
        inv = np.array([[s[1, 1], -s[0, 1]], [-s[1, 0], s[0, 0]]]) / det
        expected = float(np.sum(inv @ (mu - r)))
        assert expected == pytest.approx(0.0071 / 0.0035, rel=1e-12)
        v = validate(MarketParams(mu, s), AgentParams(r))
        assert v.leverage_statistic == pytest.approx(expected, rel=1e-12)
        assert v.borrows

    def test_not_positive_definite(self):
        m = MarketParams([0.1, 0.1], [[0.04, 0.05], [0.05, 0.04]])
        with pytest.raises(InvalidCovarianceError, match="invalid covariance"):
            validate(m, AgentParams(0.03))

    def test_asymmetric(self):
        m = MarketParams([0.1, 0.1], [[0.04, 0.01], [0.0, 0.04]])
        with pytest.raises(InvalidCovarianceError, match="symmetric"):
            validate(m, AgentParams(0.03))

    def test_tiny_pivot_rejected(self):
        m = MarketParams([0.1, 0.1], [[0.04, 0.04], [0.04, 0.04 + 1e-14]])
        with pytest.raises(InvalidCovarianceError):
            validate(m, AgentParams(0.03))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidParameterError, match="dimension"):
            MarketParams([0.1, 0.2], [[0.04]])

    @pytest.mark.parametrize("r, gamma", [(-0.01, 1.0), (math.inf, 1.0), (0.03, 0.0), (0.03, -2.0)])
    def test_bad_agent(self, r, gamma):
        with pytest.raises(InvalidParameterError):
            AgentParams(r, gamma)

    def test_non_finite_mu(self):
        with pytest.raises(InvalidParameterError):
            MarketParams([math.nan], [[0.04]])


def test_values_are_immutable():
    m = example_market()
    with pytest.raises(ValueError):
        m.mu[0] = 1.0
    c = Contract([2.0], 0.04)
    with pytest.raises(ValueError):
        c.b[0] = 1.0


class TestGrowthRate:
    def test_negotiated_contract(self):
        g = growth_rate(example_market(), AgentParams(EXAMPLE_R), Contract([19 / 6], 0.0421875))
        # rL + b(mu - rL) - var b^2 / 2 evaluated by hand
        by_hand = 0.0421875 + (19 / 6) * (MU_EX - 0.0421875) - 0.5 * VAR_EX * (19 / 6) ** 2
        assert g == pytest.approx(by_hand, abs=1e-15)
        assert g == pytest.approx(0.11640625, abs=1e-12)
        assert round(g, 4) == 0.1164

    @pytest.mark.parametrize("rL", [0.0, 0.03, 0.2])
    def test_all_cash_returns_rate(self, rL):
        m = MarketParams([0.1, 0.07], [[0.04, 0.01], [0.01, 0.09]])
        assert growth_rate(m, AgentParams(0.03), Contract([0.0, 0.0], rL)) == rL

    @pytest.mark.parametrize("rL", [0.0, 0.05, 0.5])
    def test_unlevered_ignores_rate(self, rL):
        g = growth_rate(example_market(), AgentParams(EXAMPLE_R), Contract([1.0], rL))
        assert g == pytest.approx(MU_EX - VAR_EX / 2, abs=1e-15)

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(3)
        market, agent = random_scenario(rng, 3, 1.5)
        bs = rng.normal(size=(7, 3))
        rls = rng.uniform(0, 0.1, 7)
        batch = growth_rates(market, agent, bs, rls)
        for b, rL, g in zip(bs, rls, batch):
            assert g == pytest.approx(growth_rate(market, agent, Contract(b, rL)), abs=1e-15)


class TestProfitRate:
    def test_monopoly_example(self):
        p = profit_rate(Contract([25 / 12], 0.054375), AgentParams(EXAMPLE_R))
        assert p == pytest.approx(0.02640625, abs=1e-12)
        assert round(p, 4) == 0.0264

    def test_no_loan(self):
        assert profit_rate(Contract([1.0], 0.2), AgentParams(0.01)) == 0.0

    def test_negotiated_example(self):
        p = profit_rate(Contract([19 / 6], 0.0421875), AgentParams(EXAMPLE_R))
        assert p == pytest.approx(0.02640625, abs=1e-12)

    def test_negative_allowed(self):
        assert profit_rate(Contract([2.0], 0.01), AgentParams(0.03)) < 0


class TestOptimalBet:
    def test_posted_rate_schedule_first_row(self):
        b = optimal_bet(example_market(), AgentParams(EXAMPLE_R), 0.0383)
        assert b[0] == pytest.approx(2.798, abs=5e-4)
        assert b[0] == pytest.approx(optimal_bet(example_market(), AgentParams(0.0), apr_to_cc(0.039))[0], abs=0.01)

    def test_intro_treasury_rate(self):
        b = optimal_bet(example_market(), AgentParams(0.0244), 0.0244)
        assert b[0] == pytest.approx(3.4156, abs=1e-4)

    def test_choke_at_drift(self):
        assert optimal_bet(example_market(), AgentParams(EXAMPLE_R), MU_EX)[0] == pytest.approx(0.0, abs=1e-15)

    def test_two_assets_solves_linear_system(self):
        s = np.array([[0.04, 0.01], [0.01, 0.09]])
        mu = np.array([0.10, 0.08])
        b = optimal_bet(MarketParams(mu, s), AgentParams(0.03), 0.04)
        np.testing.assert_allclose(s @ b, mu - 0.04, atol=1e-15)


def test_outcome_fields():
    o = outcome(example_market(), AgentParams(EXAMPLE_R), Contract([19 / 6], 0.0421875))
    assert o.profit == o.q * o.nim
    assert o.nim == pytest.approx(0.0121875, abs=1e-15)


def test_apr_conversion():
    assert apr_to_cc(0.0) == 0.0
    assert round(100 * apr_to_cc(0.039), 2) == 3.83
    with pytest.raises(InvalidParameterError):
        apr_to_cc(-1.0)


# --- properties -----------------------------------------------------------

scenario_args = st.tuples(
    st.integers(min_value=0, max_value=2**32 - 1),
    st.integers(min_value=1, max_value=4),
    st.sampled_from([0.5, 1.0, 2.0, 3.0]),
)


@settings(max_examples=60, deadline=None)
@given(scenario_args, st.floats(0.05, 0.95))
def test_growth_strictly_concave(args, lam):
    seed, n, gamma = args
    rng = np.random.default_rng(seed)
    market, agent = random_scenario(rng, n, gamma)
    rL = rng.uniform(0, 0.1)
    b1, b2 = rng.normal(scale=2.0, size=(2, n))
    mix = Contract(lam * b1 + (1 - lam) * b2, rL)
    lhs = growth_rate(market, agent, mix)
    rhs = lam * growth_rate(market, agent, Contract(b1, rL)) + (1 - lam) * growth_rate(market, agent, Contract(b2, rL))
    gap = lam * (1 - lam) * 0.5 * gamma * float((b1 - b2) @ market.sigma @ (b1 - b2))
    assert lhs - rhs > -1e-12
    assert lhs - rhs == pytest.approx(gap, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=4),
    st.floats(-0.1, 0.3),
    st.floats(0, 0.1),
)
def test_profit_identity(b, rL, r):
    c = Contract(b, rL)
    assert profit_rate(c, AgentParams(r)) == (np.sum(c.b) - 1.0) * (rL - r)


@settings(max_examples=20, deadline=None)
@given(scenario_args)
def test_optimal_bet_is_argmax(args):
    seed, n, gamma = args
    rng = np.random.default_rng(seed)
    market, agent = random_scenario(rng, n, gamma)
    rL = agent.r + rng.uniform(0, 0.03)
    best = optimal_bet(market, agent, rL)
    top = growth_rate(market, agent, Contract(best, rL))
    perturbed = best + rng.normal(scale=rng.uniform(1e-4, 1.0), size=(1000, n))
    assert np.all(growth_rates(market, agent, perturbed, rL) <= top + 1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.05, 0.3), st.floats(0.02, 0.6), st.floats(0.0, 0.2))
def test_affine_kelly_identity(nu, vol, rL):
    m = MarketParams.univariate(nu, vol)
    b = optimal_bet(m, AgentParams(0.0), rL)[0]
    expected = 0.5 + (nu - rL) / vol**2
    assert b == pytest.approx(expected, abs=1e-12 * max(1.0, abs(expected)))


@settings(max_examples=50, deadline=None)
@given(scenario_args, st.floats(0.1, 10.0))
def test_gamma_scaling_exact(args, gamma):
    seed, n, _ = args
    rng = np.random.default_rng(seed)
    market, agent = random_scenario(rng, n, 1.0)
    rL = rng.uniform(0, 0.1)
    kelly = optimal_bet(market, AgentParams(agent.r, 1.0), rL)
    crra = optimal_bet(market, AgentParams(agent.r, gamma), rL)
    np.testing.assert_array_equal(crra, kelly / gamma)
