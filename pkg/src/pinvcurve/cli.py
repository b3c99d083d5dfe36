"""Command-line workbench for building, comparing and analysing curves.

Exit codes: 0 success, 2 quote-file or argument error, 3 numerical failure,
4 infeasible constraints.  Output goes to ``--out``, else to the directory
named by ``PINVCURVE_OUT``, else to ``./pinvcurve-out``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import logging
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import bootstrap as bs
from . import finite_dim, multicurve, quote_optimizer, sensitivity
from .curve_solver import sample_grid, solve, solve_fixed_short_rate
from .errors import CurveError, InfeasibleError, QuoteParseError
from .instruments import assemble, read_quotes

log = logging.getLogger("pinvcurve")

OUT_ENV = "PINVCURVE_OUT"
EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 2, 3, 4
REPRICE_TOL = 1e-8


@dataclass
class RunConfig:
    """Resolved settings of one CLI invocation."""

    command: str
    quotes: Path | None
    out: Path
    valuation_date: dt.date | None = None
    spot_lag: int | None = None
    grid_start: float = 0.0
    grid_end: float | None = None
    grid_step: float = 1.0 / 365.0
    short_rate: float | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.grid_step <= 0:
            raise ValueError("--grid-step must be positive")
        if self.quotes is not None and not self.quotes.exists():
            raise FileNotFoundError(f"quote file {self.quotes} does not exist")


def resolve_quotes(text):
    """A path, or ``builtin:NAME`` for one of the bundled quote files."""
    if text is None:
        return None
    if text.startswith("builtin:"):
        name = text.split(":", 1)[1]
        ref = resources.files("pinvcurve") / "data" / f"{name}.csv"
        if not ref.is_file():
            raise FileNotFoundError(f"no bundled quote file named {name!r}")
        return Path(str(ref))
    return Path(text)


def _fmt(x):
    return f"{x:.17g}"


def _load_system(cfg: RunConfig):
    qf = read_quotes(cfg.quotes)
    valuation = cfg.valuation_date or qf.valuation_date
    if valuation is None:
        raise QuoteParseError("no valuation date: add '# valuation_date:' or pass --valuation-date")
    conv = qf.conventions()
    if cfg.spot_lag is not None:
        conv = type(conv)(**{**conv.__dict__, "spot_lag": cfg.spot_lag})
    return qf, assemble(qf.instruments, valuation, conv), conv


def _grid(cfg, last):
    end = cfg.grid_end if cfg.grid_end is not None else last
    return sample_grid(cfg.grid_start, end, cfg.grid_step)


def cmd_build(cfg: RunConfig) -> int:
    _, system, _ = _load_system(cfg)
    curve = solve(system) if cfg.short_rate is None else solve_fixed_short_rate(system, cfg.short_rate)
    cfg.out.mkdir(parents=True, exist_ok=True)
    curve.export(cfg.out / "curve.csv", _grid(cfg, system.dates[-1]))
    curve.write_weights(cfg.out / "weights.csv")
    residuals = curve.repricing_residuals()
    model = system.cashflows @ curve.knot_values()
    with open(cfg.out / "repricing.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["instrument", "price", "model", "residual"])
        for row in zip(system.labels, system.prices, model, residuals):
            out.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    worst = float(np.abs(residuals).max())
    print(f"built curve from {system.n} instruments on {system.N} dates; max residual {worst:.3e}")
    if cfg.short_rate is not None:
        print(f"forward at 0: {curve.forward(0.0):.12f}")
    return EXIT_OK if worst <= REPRICE_TOL else EXIT_NUMERIC


def cmd_bootstrap(cfg: RunConfig) -> int:
    qf, system, conv = _load_system(cfg)
    boot = bs.bootstrap(qf.instruments, cfg.valuation_date or qf.valuation_date, conv)
    cfg.out.mkdir(parents=True, exist_ok=True)
    grid = _grid(cfg, boot.times[-1])
    boot.export(cfg.out / "bootstrap_curve.csv", grid)
    with open(cfg.out / "pillars.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["date", "x", "discount"])
        out.writerow(["", _fmt(0.0), _fmt(1.0)])
        for day, x, g in zip(boot.dates, boot.times[1:], boot.factors[1:]):
            out.writerow([day.isoformat(), _fmt(x), _fmt(g)])
    curve = solve(system)
    rough_pi = bs.roughness(curve, cfg.grid_step, system.dates[-1])
    rough_bs = bs.roughness(boot, cfg.grid_step, system.dates[-1])
    worst = float(np.abs(system.residuals(boot(system.dates))).max())
    print(f"bootstrap pillars: {boot.times.size}; max residual {worst:.3e}")
    print(f"roughness pseudoinverse {rough_pi:.12g}, bootstrap {rough_bs:.12g}")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig) -> int:
    _, system, _ = _load_system(cfg)
    opts = cfg.options
    prices = any(k == "price" for k in system.quote_enters)
    cfg.out.mkdir(parents=True, exist_ok=True)
    if prices:
        rng = quote_optimizer.QuoteRange.relative_spread(system, opts["spread_rel"], kind="price")
        result = quote_optimizer.optimize_prices(system, rng)
        space = "price"
    else:
        if opts.get("spread_abs") is not None:
            rng = quote_optimizer.QuoteRange.absolute_spread(system, opts["spread_abs"], kind="rate")
        else:
            rng = quote_optimizer.QuoteRange.relative_spread(system, opts["spread_rel"], kind="rate")
        result = quote_optimizer.optimize_rate_quotes(system, rng, max_iter=opts["max_iter"])
        space = "rate"
    quote_optimizer.write_report(cfg.out / "optimization.csv", system, rng, result, space)
    optimal = system.with_prices(result.point) if space == "price" else system.with_quotes(result.point)
    solve(optimal).export(cfg.out / "curve_optimal.csv", _grid(cfg, system.dates[-1]))
    print(
        f"norm^2 at mid {result.initial_objective:.12g}, optimal {result.objective:.12g}; "
        f"KKT residual {result.kkt_residual:.3e}; iterations {result.iterations}"
    )
    return EXIT_OK


def _read_portfolio(path, origin, conv):
    times, amounts = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.lstrip().startswith("#"))
        if reader.fieldnames is None or "amount" not in reader.fieldnames:
            raise QuoteParseError("portfolio file needs an 'amount' column and 'x' or 'date'", 1)
        for lineno, rec in enumerate(reader, start=2):
            try:
                if rec.get("date"):
                    times.append(conv.time(origin, dt.date.fromisoformat(rec["date"].strip())))
                else:
                    times.append(float(rec["x"]))
                amounts.append(float(rec["amount"]))
            except (TypeError, ValueError, KeyError) as exc:
                raise QuoteParseError(f"bad portfolio row: {exc}", lineno) from None
    return sensitivity.PortfolioCashflows(np.array(times), np.array(amounts))


def cmd_hedge(cfg: RunConfig) -> int:
    _, system, conv = _load_system(cfg)
    opts = cfg.options
    curve = solve(system)
    if opts.get("payer_swap_years"):
        portfolio, rate = sensitivity.par_swap_portfolio(curve, system.origin, opts["payer_swap_years"], conv)
        print(f"payer swap {opts['payer_swap_years']}y at par rate {rate:.8f}")
    elif opts.get("portfolio"):
        portfolio = _read_portfolio(opts["portfolio"], system.origin, conv)
    else:
        raise QuoteParseError("hedge needs --portfolio or --payer-swap-years")
    kinds = set(opts["hedge_kind"])
    rows = [
        i
        for i, instr in enumerate(system.instruments)
        if system.quote_enters[i] != "fixed" and ("all" in kinds or instr.kind in kinds)
    ]
    if not rows:
        raise CurveError(f"no hedge instruments of kind {sorted(kinds)}")
    hedges = {system.labels[i]: sensitivity.PortfolioCashflows.from_row(system, i) for i in rows}
    grid = sensitivity.KeyRateGrid.spaced(system.dates[-1], opts["keyrate_step"])
    report = sensitivity.keyrate_hedge(curve, portfolio, grid, hedges)
    cfg.out.mkdir(parents=True, exist_ok=True)
    report.write_csv(cfg.out / "hedge.csv")
    with open(cfg.out / "keyrate_sensitivities.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["horizon", "portfolio"] + list(hedges))
        cols = [sensitivity.keyrate_sensitivities(curve, h, grid) for h in hedges.values()]
        port = sensitivity.keyrate_sensitivities(curve, portfolio, grid)
        for j, xi in enumerate(grid.horizons):
            out.writerow([_fmt(xi), _fmt(port[j])] + [_fmt(c[j]) for c in cols])
    print(f"key-rate hedge over {grid.J} horizons; residual {report.residual:.6g} of {report.unhedged:.6g}")
    return EXIT_OK


def cmd_discrete(cfg: RunConfig) -> int:
    _, system, _ = _load_system(cfg)
    opts = cfg.options
    grid = finite_dim.DiscreteGrid.covering(system.dates[-1], opts["delta"])
    op = finite_dim.build_operator(grid.K, opts["delta"], opts["slope_scale"])
    if opts["monotone"] or opts["positive"]:
        d, sol = finite_dim.solve_discrete_constrained(
            system.cashflows,
            system.prices,
            op,
            dates=system.dates,
            monotone=opts["monotone"],
            positive=opts["positive"],
            margin=opts["margin"],
        )
        print(f"constrained QP: {int(sol.active.sum())} active constraints, KKT residual {sol.kkt_residual:.3e}")
    else:
        d = finite_dim.solve_discrete(system.cashflows, system.prices, op, dates=system.dates)
    cfg.out.mkdir(parents=True, exist_ok=True)
    finite_dim.write_discrete_curve(cfg.out / "discrete.csv", op, d)
    worst = float(np.abs(system.cashflows @ (grid.allocation(system.dates) @ d) - system.prices).max())
    print(f"discrete curve on {grid.K} nodes; max residual {worst:.3e}")
    return EXIT_OK


def cmd_multicurve(cfg: RunConfig) -> int:
    opts = cfg.options
    mc = multicurve.build_all(
        opts["ois"], opts["fixed"], opts["basis_3m6m"], opts["basis_1m"], opts["months"], opts["one_month_reference"]
    )
    manifest = mc.export(cfg.out)
    worst = max(float(np.abs(r).max()) for r in mc.residuals().values())
    print(f"multi-curve build written to {manifest}; max PV residual {worst:.3e}")
    return EXIT_OK if worst <= REPRICE_TOL else EXIT_NUMERIC


COMMANDS = {
    "build": cmd_build,
    "bootstrap": cmd_bootstrap,
    "optimize": cmd_optimize,
    "hedge": cmd_hedge,
    "discrete": cmd_discrete,
    "multicurve": cmd_multicurve,
}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./pinvcurve-out)")
    common.add_argument("--valuation-date", type=dt.date.fromisoformat)
    common.add_argument("--spot-lag", type=int)
    common.add_argument("--grid-start", type=float, default=0.0)
    common.add_argument("--grid-end", type=float)
    common.add_argument("--grid-step", type=float, default=1.0 / 365.0)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pinvcurve", description="Smoothest discount and forward curves.")
    sub = parser.add_subparsers(dest="command", required=True)

    def quoted(name, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--quotes", required=True, help="quote CSV path or builtin:NAME")
        return p

    p = quoted("build", "fit the smoothest discount curve")
    p.add_argument("--pin-short-rate", type=float, dest="short_rate")
    quoted("bootstrap", "traditional bootstrap and roughness comparison")
    p = quoted("optimize", "choose quotes inside bid-ask ranges")
    p.add_argument("--spread-rel", type=float, default=0.005)
    p.add_argument("--spread-abs", type=float)
    p.add_argument("--max-iter", type=int, default=500)
    p = quoted("hedge", "key-rate hedge of a cashflow portfolio")
    p.add_argument("--portfolio", help="CSV with amount and x (years) or date columns")
    p.add_argument("--payer-swap-years", type=int)
    p.add_argument("--keyrate-step", type=float, default=0.25)
    p.add_argument("--hedge-kind", nargs="+", default=["swap"])
    p = quoted("discrete", "discrete smoothest curve on a uniform grid")
    p.add_argument("--delta", type=float, default=1.0 / 52.0)
    p.add_argument("--monotone", action="store_true")
    p.add_argument("--positive", action="store_true")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--slope-scale", choices=["verbatim", "consistent"], default="consistent")
    p = sub.add_parser("multicurve", parents=[common], help="OIS discount curve and 6M/3M/1M forward curves")
    p.add_argument("--ois", required=True)
    p.add_argument("--fixed", required=True, help="6M fixed-versus-floating swaps with the 6M cash fixing")
    p.add_argument("--basis-3m6m", required=True)
    p.add_argument("--basis-1m", required=True)
    p.add_argument("--one-month-reference", type=int, choices=[3, 6], default=3)
    p.add_argument("--months", type=int, default=360)
    return parser


_COMMON = {"command", "out", "valuation_date", "spot_lag", "grid_start", "grid_end", "grid_step", "verbose", "quotes"}


def make_config(args) -> RunConfig:
    out = Path(args.out or os.environ.get(OUT_ENV) or "pinvcurve-out")
    options = {k: v for k, v in vars(args).items() if k not in _COMMON and k != "short_rate"}
    for key in ("ois", "fixed", "basis_3m6m", "basis_1m", "portfolio"):
        if options.get(key) is not None:
            options[key] = resolve_quotes(options[key])
    if options.get("spread_rel") is not None and options["spread_rel"] < 0:
        raise ValueError("--spread-rel must be nonnegative")
    return RunConfig(
        command=args.command,
        quotes=resolve_quotes(getattr(args, "quotes", None)),
        out=out,
        valuation_date=args.valuation_date,
        spot_lag=args.spot_lag,
        grid_start=args.grid_start,
        grid_end=args.grid_end,
        grid_step=args.grid_step,
        short_rate=getattr(args, "short_rate", None),
        options=options,
    )


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = make_config(args)
        return COMMANDS[cfg.command](cfg)
    except (QuoteParseError, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, CurveError) and not isinstance(exc, QuoteParseError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CurveError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
