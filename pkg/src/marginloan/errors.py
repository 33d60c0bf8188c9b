"""Exception hierarchy shared by the library and the CLI."""


class MarginLoanError(Exception):
    """Base class for every error raised by :mod:`marginloan`."""


class InvalidParameterError(MarginLoanError, ValueError):
    """Malformed market or agent parameters (shape, finiteness, sign)."""


class InvalidCovarianceError(InvalidParameterError):
    """Covariance matrix is asymmetric or not positive definite."""

    def __init__(self, detail: str):
        super().__init__(f"invalid covariance: {detail}")


class UnsupportedError(MarginLoanError, ValueError):
    """Operation only defined for a special case (e.g. one asset, log utility)."""


class EconomicInfeasibilityError(MarginLoanError):
    """The economics admit no answer: no gain from trade, no loan market."""


class NoGainError(EconomicInfeasibilityError):
    """Nash bargaining has an empty gain region."""


class CornerError(NoGainError):
    """The client would not borrow even at the broker's own cost of funds."""

    def __init__(self, detail: str = ""):
        msg = "corner: no mutually beneficial loan"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class ThreatDominatesError(NoGainError):
    """The threat point lies on or above the efficient frontier."""

    def __init__(self, detail: str = ""):
        msg = "threat dominates cooperation"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class NonviableMarketError(EconomicInfeasibilityError):
    """The choke rate does not exceed the broker call rate."""

    def __init__(self, detail: str = ""):
        msg = "no viable loan market"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class NumericalError(MarginLoanError, ArithmeticError):
    """A post-condition failed numerically (non-finite value, broken identity)."""
