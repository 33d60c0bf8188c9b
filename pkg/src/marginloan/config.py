"""Scenario files: a flat ``key = value`` format with matrix blocks.

Grammar (one statement per line, ``#`` starts a comment)::

    nu = 9%                  # one asset: geometric growth rate ...
    sigma = 15%              # ... and volatility; drift is nu + sigma^2/2
    mu = 0.10, 0.08          # or: explicit drift vector ...
    matrix covariance        # ... and covariance, one row per line
    0.04 0.01
    0.01 0.09
    end
    r_cc = 3%                # call rate, continuously compounded
    r_apr = 3.05%            # ... or annually compounded (exactly one of the two)
    gamma = 1                # relative risk aversion, default 1
    threat = breakdown       # breakdown | monopoly | explicit(profit, growth)
    sim_horizon_years = 200  # optional simulation block
    sim_dt_years = 1/252
    sim_paths = 400
    sim_seed = 7

Numbers accept a trailing ``%`` (divided by 100) and simple fractions ``a/b``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .bargaining import ThreatPoint
from .errors import MarginLoanError
from .market import AgentParams, MarketParams, apr_to_cc
from .simulator import SimConfig

THREAT_KINDS = ("breakdown", "monopoly", "explicit")
_SCALAR_KEYS = {
    "nu", "sigma", "mu", "r_cc", "r_apr", "gamma", "threat",
    "sim_horizon_years", "sim_dt_years", "sim_paths", "sim_seed",
}
_EXPLICIT = re.compile(r"^explicit\s*\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)$")


class ConfigError(MarginLoanError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.field = field


@dataclass(frozen=True)
class ThreatSpec:
    kind: str
    profit: float | None = None
    growth: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in THREAT_KINDS:
            raise ConfigError(f"unknown threat '{self.kind}'", field="threat")
        explicit = self.kind == "explicit"
        if explicit and (self.profit is None or self.growth is None):
            raise ConfigError("explicit threat needs both profit and growth", field="threat")
        if not explicit and (self.profit is not None or self.growth is not None):
            raise ConfigError("only an explicit threat carries numbers", field="threat")

    def point(self) -> ThreatPoint:
        assert self.profit is not None and self.growth is not None
        return ThreatPoint(self.profit, self.growth)


@dataclass(frozen=True)
class ScenarioConfig:
    market: MarketParams
    agent: AgentParams
    threat: ThreatSpec = ThreatSpec("breakdown")
    sim: SimConfig | None = None


def parse_number(text: str) -> float:
    s = text.strip()
    percent = s.endswith("%")
    if percent:
        s = s[:-1].strip()
    if "/" in s:
        num, _, den = s.partition("/")
        value = float(num) / float(den)
    else:
        value = float(s)
    return value / 100.0 if percent else value


def _number(text: str, line: int, key: str) -> float:
    try:
        return parse_number(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse number '{text.strip()}'", line, key) from None


def _integer(text: str, line: int, key: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got '{text.strip()}'", line, key) from None


def parse_config(text: str) -> ScenarioConfig:
    values: dict[str, tuple[int, str]] = {}
    matrix: list[list[float]] | None = None
    matrix_line = 0
    in_matrix = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if in_matrix:
            if line == "end":
                in_matrix = False
                continue
            assert matrix is not None
            if "=" in line:
                raise ConfigError("covariance block not closed with 'end'", matrix_line, "covariance")
            matrix.append([_number(tok, lineno, "covariance") for tok in line.replace(",", " ").split()])
            continue
        if line.startswith("matrix"):
            name = line[len("matrix"):].strip()
            if name != "covariance":
                raise ConfigError(f"unknown matrix block '{name}'", lineno)
            if matrix is not None:
                raise ConfigError("duplicate covariance block", lineno, "covariance")
            matrix, matrix_line, in_matrix = [], lineno, True
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"expected 'key = value', got '{line}'", lineno)
        if key not in _SCALAR_KEYS:
            raise ConfigError("unknown key", lineno, key)
        if key in values:
            raise ConfigError("duplicate key", lineno, key)
        values[key] = (lineno, value.strip())

    if in_matrix:
        raise ConfigError("covariance block not closed with 'end'", matrix_line, "covariance")

    return ScenarioConfig(
        market=_market(values, matrix, matrix_line),
        agent=_agent(values),
        threat=_threat(values),
        sim=_sim(values),
    )


def _market(values, matrix, matrix_line) -> MarketParams:
    univariate = "nu" in values or "sigma" in values
    explicit = "mu" in values or matrix is not None
    if univariate and explicit:
        raise ConfigError("give either nu/sigma or mu/covariance, not both", field="market")
    if univariate:
        for key in ("nu", "sigma"):
            if key not in values:
                raise ConfigError("missing", field=key)
        nu = _number(values["nu"][1], values["nu"][0], "nu")
        vol = _number(values["sigma"][1], values["sigma"][0], "sigma")
        if not vol > 0:
            raise ConfigError("volatility must be positive", values["sigma"][0], "sigma")
        return MarketParams.univariate(nu, vol)
    if not explicit:
        raise ConfigError("no market given (need nu/sigma or mu/covariance)", field="market")
    if "mu" not in values:
        raise ConfigError("missing", field="mu")
    if matrix is None:
        raise ConfigError("missing covariance block", field="covariance")
    line, text = values["mu"]
    mu = [_number(tok, line, "mu") for tok in text.replace(",", " ").split()]
    try:
        return MarketParams(mu=mu, sigma=matrix)
    except (MarginLoanError, ValueError) as exc:
        raise ConfigError(str(exc), matrix_line, "covariance") from None


def _agent(values) -> AgentParams:
    has_cc, has_apr = "r_cc" in values, "r_apr" in values
    if has_cc == has_apr:
        raise ConfigError("give exactly one of r_cc, r_apr", field="r_cc")
    key = "r_cc" if has_cc else "r_apr"
    line, text = values[key]
    rate = _number(text, line, key)
    gamma = 1.0
    if "gamma" in values:
        gamma = _number(values["gamma"][1], values["gamma"][0], "gamma")
    try:
        if key == "r_apr":
            rate = apr_to_cc(rate)
        return AgentParams(r=rate, gamma=gamma)
    except (MarginLoanError, ValueError) as exc:
        raise ConfigError(str(exc), line, key) from None


def _threat(values) -> ThreatSpec:
    if "threat" not in values:
        return ThreatSpec("breakdown")
    line, text = values["threat"]
    match = _EXPLICIT.match(text)
    if match:
        return ThreatSpec(
            "explicit",
            _number(match.group(1), line, "threat"),
            _number(match.group(2), line, "threat"),
        )
    if text not in ("breakdown", "monopoly"):
        raise ConfigError(f"expected breakdown, monopoly or explicit(profit, growth), got '{text}'", line, "threat")
    return ThreatSpec(text)


def _sim(values) -> SimConfig | None:
    keys = ("sim_horizon_years", "sim_dt_years", "sim_paths")
    present = [k for k in keys if k in values]
    if not present:
        if "sim_seed" in values:
            raise ConfigError("sim_seed without a simulation block", values["sim_seed"][0], "sim_seed")
        return None
    for k in keys:
        if k not in values:
            raise ConfigError("missing", field=k)
    seed = 0
    if "sim_seed" in values:
        seed = _integer(values["sim_seed"][1], values["sim_seed"][0], "sim_seed")
    horizon = _number(values["sim_horizon_years"][1], values["sim_horizon_years"][0], "sim_horizon_years")
    dt = _number(values["sim_dt_years"][1], values["sim_dt_years"][0], "sim_dt_years")
    paths = _integer(values["sim_paths"][1], values["sim_paths"][0], "sim_paths")
    try:
        return SimConfig(horizon_years=horizon, dt_years=dt, n_paths=paths, seed=seed)
    except (MarginLoanError, ValueError) as exc:
        raise ConfigError(str(exc), field="sim") from None


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialise to the explicit mu/covariance form; ``parse_config`` inverts it exactly."""
    lines = [
        "mu = " + ", ".join(repr(float(x)) for x in cfg.market.mu),
        "matrix covariance",
        *(" ".join(repr(float(x)) for x in row) for row in cfg.market.sigma),
        "end",
        f"r_cc = {cfg.agent.r!r}",
        f"gamma = {cfg.agent.gamma!r}",
    ]
    t = cfg.threat
    if t.kind == "explicit":
        lines.append(f"threat = explicit({t.profit!r}, {t.growth!r})")
    else:
        lines.append(f"threat = {t.kind}")
    if cfg.sim is not None:
        lines += [
            f"sim_horizon_years = {cfg.sim.horizon_years!r}",
            f"sim_dt_years = {cfg.sim.dt_years!r}",
            f"sim_paths = {cfg.sim.n_paths}",
            f"sim_seed = {cfg.sim.seed}",
        ]
    return "\n".join(lines) + "\n"
