"""Command-line front end.

Exit codes: 0 success, 2 config or usage error, 3 economic infeasibility
(no gain from trade, no viable loan market), 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import bargaining, monopoly
from .config import ConfigError, ScenarioConfig, load_config, parse_number
from .errors import EconomicInfeasibilityError, InvalidParameterError, NumericalError, UnsupportedError
from .market import AgentParams, apr_to_cc, growth_rate, optimal_bet
from .simulator import compare_contracts, paired_difference

EXIT_OK, EXIT_CONFIG, EXIT_ECONOMIC, EXIT_NUMERIC = 0, 2, 3, 4

RATE = "%/yr"
PROFIT = "$/($*yr)"
LEVERAGE = "$/$"


def pct(x: float, digits: int = 4) -> str:
    return f"{100.0 * x:.{digits}f} {RATE}"


def machine(x: float) -> str:
    return f"{x:.12g}"


def write_csv(path: str | None, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    if path is None:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([machine(v) if isinstance(v, float) else v for v in row])


def resolve_threat(cfg: ScenarioConfig) -> bargaining.ThreatPoint:
    kind = cfg.threat.kind
    if kind == "breakdown":
        return bargaining.breakdown_threat(cfg.market, cfg.agent)
    if kind == "monopoly":
        return monopoly.monopoly_threat(cfg.market, cfg.agent)
    return cfg.threat.point()


def _print_table(rows: Sequence[tuple[str, str]], out: TextIO) -> None:
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        print(f"  {label:<{width}}  {value}", file=out)


def cmd_solve(cfg: ScenarioConfig, csv_path: str | None, out: TextIO) -> int:
    threat = resolve_threat(cfg)
    sol = bargaining.solve_nash(cfg.market, cfg.agent, threat)
    c, o = sol.contract, sol.outcome

    print(f"threat point ({cfg.threat.kind})", file=out)
    _print_table([("broker profit", pct(threat.profit)), ("client growth", pct(threat.growth))], out)
    print("negotiated contract", file=out)
    rows = [(f"b*[{i + 1}]", f"{w:.4f} {LEVERAGE}") for i, w in enumerate(c.b)]
    rows += [
        ("rL*", pct(c.rL)),
        ("q*", f"{o.q:.4f} {LEVERAGE}"),
        ("nim", pct(o.nim)),
        ("growth", pct(o.growth)),
        ("profit", f"{o.profit:.6f} {PROFIT}  ({100 * o.profit:.4f}% of equity/yr)"),
        ("surplus client", pct(sol.surplus_gambler)),
        ("surplus broker", f"{sol.surplus_broker:.6f} {PROFIT}"),
    ]
    _print_table(rows, out)

    records = [(f"b{i + 1}", float(w), LEVERAGE) for i, w in enumerate(c.b)]
    records += [
        ("rL", c.rL, "1/yr"),
        ("q", o.q, LEVERAGE),
        ("nim", o.nim, "1/yr"),
        ("growth", o.growth, "1/yr"),
        ("profit", o.profit, PROFIT),
        ("surplus_client", sol.surplus_gambler, "1/yr"),
        ("surplus_broker", sol.surplus_broker, PROFIT),
        ("threat_profit", threat.profit, PROFIT),
        ("threat_growth", threat.growth, "1/yr"),
    ]
    write_csv(csv_path, ("field", "value", "unit"), records)
    return EXIT_OK


def cmd_monopoly(cfg: ScenarioConfig, csv_path: str | None, out: TextIO) -> int:
    rep = monopoly.monopoly_solution(cfg.market, cfg.agent)
    d = rep.demand
    eps = monopoly.elasticity(cfg.market, cfg.agent, rep.q_m)

    print(f"demand curve: q(rL) = {d.intercept_q:.6g} - {-d.slope_q:.6g} * rL", file=out)
    rows = [
        ("choke rate", pct(d.choke_rate)),
        ("q_M", f"{rep.q_m:.4f} {LEVERAGE}"),
        ("r_M", pct(rep.r_m)),
    ]
    rows += [(f"b_M[{i + 1}]", f"{w:.4f} {LEVERAGE}") for i, w in enumerate(rep.b_m)]
    rows += [
        ("profit", f"{rep.profit_m:.6f} {PROFIT}  ({100 * rep.profit_m:.4f}% of equity/yr)"),
        ("growth", pct(rep.growth_m)),
        ("consumer surplus", pct(rep.consumer_surplus)),
        ("deadweight loss", pct(rep.deadweight_loss)),
        ("elasticity at q_M", f"{eps:.4f}"),
    ]
    _print_table(rows, out)

    records = [
        ("demand_intercept", d.intercept_q, LEVERAGE),
        ("demand_slope", d.slope_q, "$/$ per (1/yr)"),
        ("choke_rate", d.choke_rate, "1/yr"),
        ("q_m", rep.q_m, LEVERAGE),
        ("r_m", rep.r_m, "1/yr"),
    ]
    records += [(f"b_m{i + 1}", float(w), LEVERAGE) for i, w in enumerate(rep.b_m)]
    records += [
        ("profit_m", rep.profit_m, PROFIT),
        ("growth_m", rep.growth_m, "1/yr"),
        ("consumer_surplus", rep.consumer_surplus, "1/yr"),
        ("deadweight_loss", rep.deadweight_loss, "1/yr"),
        ("elasticity_at_q_m", eps, "1"),
    ]
    write_csv(csv_path, ("field", "value", "unit"), records)
    return EXIT_OK


def frontier_records(cfg: ScenarioConfig, grid: int) -> list[tuple[float, float, str]]:
    line = bargaining.efficient_frontier(cfg.market, cfg.agent)
    top = line.intercept - cfg.agent.r
    profits = [top / 2.0] if grid == 1 else list(np.linspace(0.0, top, grid))
    records = [(float(p), line.growth_at(float(p)), "frontier") for p in profits]
    threat = resolve_threat(cfg)
    records.append((threat.profit, threat.growth, "threat"))
    try:
        sol = bargaining.solve_nash(cfg.market, cfg.agent, threat)
    except EconomicInfeasibilityError as exc:
        print(f"warning: no negotiated point: {exc}", file=sys.stderr)
    else:
        records.append((sol.outcome.profit, sol.outcome.growth, "nash"))
    return records


def cmd_frontier(cfg: ScenarioConfig, grid: int, csv_path: str | None, out: TextIO) -> int:
    records = frontier_records(cfg, grid)
    line = bargaining.efficient_frontier(cfg.market, cfg.agent)
    print(f"efficient frontier: growth = {pct(line.intercept)} - profit", file=out)
    print(f"  {'profit':>22}  {'growth':>14}  label", file=out)
    for p, g, label in records:
        print(f"  {p:>12.6f} {PROFIT}  {pct(g):>14}  {label}", file=out)
    write_csv(csv_path, ("pi", "gamma", "label"), records)
    return EXIT_OK


def table_records(cfg: ScenarioConfig, aprs: Sequence[float]) -> list[tuple[float, float, float]]:
    if cfg.market.n != 1:
        raise UnsupportedError("table needs a single-asset market")
    rows = []
    for apr in aprs:
        rate = apr_to_cc(apr)
        rows.append((apr, rate, float(optimal_bet(cfg.market, cfg.agent, rate)[0])))
    return rows


def cmd_table(cfg: ScenarioConfig, aprs: Sequence[float], csv_path: str | None, out: TextIO) -> int:
    rows = table_records(cfg, aprs)
    print(f"  {'APR':>8}  {'log(1+APR)':>10}  {'Kelly bet':>9}", file=out)
    for apr, rate, bet in rows:
        print(f"  {100 * apr:>7.2f}%  {100 * rate:>9.2f}%  {bet:>9.2f}", file=out)
    write_csv(csv_path, ("apr", "rate_cc", "kelly_bet"), rows)
    return EXIT_OK


def cmd_simulate(cfg: ScenarioConfig, csv_path: str | None, out: TextIO, workers: int = 1) -> int:
    if cfg.sim is None:
        raise ConfigError("simulate needs sim_horizon_years, sim_dt_years and sim_paths", field="sim")
    threat = resolve_threat(cfg)
    sol = bargaining.solve_nash(cfg.market, cfg.agent, threat)
    labelled = [("nash", sol.contract)]
    if cfg.threat.kind == "monopoly":
        labelled.append(("monopoly", monopoly.monopoly_solution(cfg.market, cfg.agent).contract))

    results = compare_contracts(cfg.market, cfg.agent, [c for _, c in labelled], cfg.sim, workers)
    # wealth grows at the log-utility rate whatever the welfare gamma
    kelly = AgentParams(cfg.agent.r, 1.0)
    sim = cfg.sim
    print(
        f"{sim.n_paths} paths, horizon {sim.horizon_years:g} yr, dt {sim.dt_years:.6g} yr, seed {sim.seed}",
        file=out,
    )
    records = []
    for (label, contract), res in zip(labelled, results):
        analytic = growth_rate(cfg.market, kelly, contract)
        z = (res.mean_growth - analytic) / res.stderr_growth if res.stderr_growth > 0 else math.nan
        print(
            f"  {label:<9} mean growth {pct(res.mean_growth)} +/- {100 * res.stderr_growth:.4f}"
            f"  analytic {pct(analytic)}  z={z:+.2f}  broker income {res.mean_broker_income_rate:.6f} {PROFIT}",
            file=out,
        )
        records.append((label, res.mean_growth, res.stderr_growth, analytic, res.mean_broker_income_rate, res.n_paths))
    if len(results) == 2:
        diff, se = paired_difference(results[0], results[1])
        gap = growth_rate(cfg.market, kelly, labelled[0][1]) - growth_rate(cfg.market, kelly, labelled[1][1])
        print(
            f"  paired    nash - monopoly {pct(diff)} +/- {100 * se:.4f}  analytic gap {pct(gap)}",
            file=out,
        )
        records.append(("nash-monopoly", diff, se, gap, math.nan, results[0].n_paths))
    write_csv(
        csv_path,
        ("label", "mean_growth", "stderr_growth", "analytic_growth", "broker_income_rate", "n_paths"),
        records,
    )
    return EXIT_OK


def _rates(text: str) -> list[float]:
    """Comma-separated APR percents; ``3.9`` means 3.9%."""
    try:
        return [parse_number(tok.strip().rstrip("%")) / 100.0 for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rate list '{text}'") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marginloan", description="Nash-bargained margin loans for Kelly/CRRA investors."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=True, help="scenario file")
        p.add_argument("--csv", default=None, help="write machine-readable records here")
        return p

    add("solve", "negotiated contract under the configured threat")
    add("monopoly", "monopoly benchmark and demand curve")
    p = add("frontier", "points on the efficient profit-growth frontier")
    p.add_argument("--grid", type=int, default=11)
    p = add("table", "Kelly bets for a list of annually compounded loan rates")
    p.add_argument("--rates", type=_rates, required=True, help="APR percents, e.g. 3.9,3.4,2.9,2.7")
    p = add("simulate", "Monte Carlo check of the negotiated contract")
    p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    try:
        cfg = load_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg, args.csv, out)
        if args.command == "monopoly":
            return cmd_monopoly(cfg, args.csv, out)
        if args.command == "frontier":
            if args.grid < 1:
                raise ConfigError("grid must be >= 1", field="--grid")
            return cmd_frontier(cfg, args.grid, args.csv, out)
        if args.command == "table":
            return cmd_table(cfg, args.rates, args.csv, out)
        return cmd_simulate(cfg, args.csv, out, args.workers)
    except (ConfigError, InvalidParameterError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EconomicInfeasibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ECONOMIC
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
