"""Nash-bargained margin loans between a broker and a Kelly/CRRA investor."""

from .bargaining import (
    BargainSolution,
    FrontierLine,
    OracleConfig,
    ThreatPoint,
    breakdown_threat,
    efficient_frontier,
    final_utilities,
    nash_product,
    negotiated_rate,
    oracle_solve,
    rule_of_thumb_rate,
    solve_nash,
)
from .errors import (
    CornerError,
    EconomicInfeasibilityError,
    InvalidCovarianceError,
    InvalidParameterError,
    MarginLoanError,
    NonviableMarketError,
    NoGainError,
    NumericalError,
    ThreatDominatesError,
    UnsupportedError,
)
from .market import (
    AgentParams,
    Contract,
    MarketParams,
    Outcome,
    Validation,
    apr_to_cc,
    growth_rate,
    optimal_bet,
    outcome,
    profit_rate,
    validate,
)
from .monopoly import DemandCurve, MonopolyReport, demand_curve, elasticity, monopoly_solution, monopoly_threat
from .simulator import SimConfig, SimResult, compare_contracts, paired_difference, simulate

__version__ = "0.1.0"
