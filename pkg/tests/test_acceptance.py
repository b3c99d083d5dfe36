"""The ten acceptance criteria at their stated tolerances.

Each check prints one ``PASS``/``FAIL`` line (also collected in the terminal
summary) before asserting.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, data_path, hilbert_norm_squared, load_system
from pinvcurve.bootstrap import bootstrap, roughness
from pinvcurve.curve_solver import KernelExpansion, fit, solve, solve_fixed_short_rate
from pinvcurve.finite_dim import DiscreteGrid, build_operator, solve_discrete, solve_discrete_constrained
from pinvcurve.multicurve import build_all
from pinvcurve.quote_optimizer import QuoteRange, norm_gradient_wrt_quotes, norm_squared, optimize_prices
from pinvcurve.sensitivity import (
    KeyRateGrid,
    PortfolioCashflows,
    dcashflow_direction,
    dprice_direction,
    keyrate_hedge,
    par_swap_portfolio,
)

SYSTEMS = {"gilts": "uk_gilts_1996.csv", "usd": "usd_2012.csv", "eonia": "eur_2013_eonia.csv"}
MULTI = ("eur_2013_eonia.csv", "eur_2013_6m_fix.csv", "eur_2013_3m6m.csv", "eur_2013_1m3m.csv")


def verdict(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def timed_build(name):
    start = time.perf_counter()
    qf, system = load_system(name)
    curve = solve(system)
    return system, curve, time.perf_counter() - start


def test_c01_gilt_repricing():
    system, curve, elapsed = timed_build("uk_gilts_1996.csv")
    worst = float(np.abs(curve.repricing_residuals()).max())
    verdict("C1 gilt repricing", worst <= 1e-8 and elapsed < 1.0, f"max residual {worst:.2e}, {elapsed:.3f}s")


def test_c02_usd_repricing():
    system, curve, elapsed = timed_build("usd_2012.csv")
    # FRA and futures rows have price 0, so each residual is scaled by its row's gross present value.
    gross = np.abs(system.cashflows) @ np.abs(curve.knot_values())
    relative = float(np.max(np.abs(curve.repricing_residuals()) / np.maximum(np.abs(system.prices), gross)))
    ok = system.cashflows.shape == (18, 40) and relative <= 1e-10 and elapsed < 1.0
    verdict("C2 USD repricing", ok, f"{system.n}x{system.N}, max relative residual {relative:.2e}, {elapsed:.3f}s")


def test_c03_short_rate_pin(gilts):
    curve = solve_fixed_short_rate(gilts[1], 0.055)
    err = abs(curve.forward(0.0) - 0.055)
    verdict("C3 short-rate pin", err <= 1e-10, f"|f(0) - 0.055| = {err:.2e}")


def test_c04_norm_identity():
    worst = 0.0
    for name in SYSTEMS.values():
        curve = solve(load_system(name)[1])
        q = hilbert_norm_squared(curve, curve.derivative, curve.second_derivative, float(curve.dates[-1]))
        worst = max(worst, abs(q - curve.norm_squared()) / curve.norm_squared())
    verdict("C4 norm identity", worst <= 1e-6, f"max relative gap {worst:.2e} over {len(SYSTEMS)} systems")


def _relative(analytic, numeric):
    return float(np.abs(np.asarray(analytic) - np.asarray(numeric)).max() / max(np.abs(numeric).max(), 1e-300))


def test_c05_gradient_suites():
    rng = np.random.default_rng(5)
    h = 1e-6
    worst = {"dp": 0.0, "dC": 0.0, "quote": 0.0}
    for name in SYSTEMS.values():
        _, s = load_system(name)
        curve = solve(s)
        mask = s.cashflows != 0
        quoted = np.abs(s.quote_sensitivity).sum(axis=1) > 0
        quotes = np.where(quoted, s.quotes, np.nan)
        for _ in range(20):
            x = rng.uniform(0.0, s.dates[-1], 20)
            v = rng.normal(size=s.n)
            scale = max(1.0, np.abs(s.prices).max())

            def g(C, p):
                return KernelExpansion(s.dates, fit(s.dates, C, p).weights)(x)

            fd = (g(s.cashflows, s.prices + h * scale * v) - g(s.cashflows, s.prices - h * scale * v)) / (2 * h * scale)
            worst["dp"] = max(worst["dp"], _relative(dprice_direction(curve, v)(x), fd))

            m = rng.normal(size=s.cashflows.shape) * mask * np.abs(s.cashflows)
            fd = (g(s.cashflows + h * m, s.prices) - g(s.cashflows - h * m, s.prices)) / (2 * h)
            worst["dC"] = max(worst["dC"], _relative(dcashflow_direction(curve, m)(x), fd))

            # Quotes move C through the instrument-supplied derivatives (coupons, swap and deposit rates).
            v = rng.normal(size=s.n) * quoted
            fd = (norm_squared(s.with_quotes(quotes + h * v)) - norm_squared(s.with_quotes(quotes - h * v))) / (2 * h)
            worst["quote"] = max(worst["quote"], _relative([norm_gradient_wrt_quotes(s) @ v], [fd]))
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict("C5 gradient suites", max(worst.values()) <= 1e-5, f"max relative errors {detail}")


def test_c06_bid_ask_smoothing(gilts):
    _, s = gilts
    rng = QuoteRange.relative_spread(s, 0.005)
    res = optimize_prices(s, rng)
    inside = bool(np.all(res.point >= rng.bid) and np.all(res.point <= rng.ask))
    ok = res.objective < res.initial_objective and inside and res.kkt_residual <= 1e-8
    verdict(
        "C6 bid-ask smoothing",
        ok,
        f"norm^2 {res.initial_objective:.10f} -> {res.objective:.10f}, in bounds {inside}, KKT {res.kkt_residual:.1e}",
    )


@pytest.fixture(scope="module")
def swap_hedge():
    qf, s = load_system("usd_2012.csv")
    curve = solve(s)
    portfolio, _ = par_swap_portfolio(curve, s.origin, 13, qf.conventions())
    hedges = {
        s.labels[i]: PortfolioCashflows.from_row(s, i) for i, instr in enumerate(s.instruments) if instr.kind == "swap"
    }
    grid = KeyRateGrid.spaced(s.dates[-1], 0.25)
    return keyrate_hedge(curve, portfolio, grid, hedges), len(hedges), grid.J


def test_c07a_hedge_top_two(swap_hedge):
    report, count, J = swap_hedge
    top = [report.labels[i] for i in np.argsort(-np.abs(report.quantities))[:2]]
    verdict("C7a hedge top two", count == 9 and set(top) == {"Swap 10y", "Swap 15y"}, f"largest |q|: {top}")


def test_c07b_hedge_residual(swap_hedge):
    # Nine hedges cannot zero J = 121 key-rate sensitivities; see the decisions ledger.
    report, _, J = swap_hedge
    ratio = report.residual / report.unhedged
    verdict("C7b hedge residual", ratio < 0.05, f"residual/unhedged = {ratio:.4f} over J = {J} horizons (needs < 0.05)")


def test_c08_discrete_convergence(gilts, gilt_curve):
    _, s = gilts
    errors = []
    diff = 0.0
    for delta in (1 / 12, 1 / 52, 1 / 365):
        grid = DiscreteGrid.covering(s.dates[-1], delta)
        op = build_operator(grid.K, delta, "consistent")
        d = solve_discrete(s.cashflows, s.prices, op, dates=s.dates)
        inside = grid.nodes <= s.dates[-1]
        errors.append(float(np.abs(d[inside] - gilt_curve(grid.nodes[inside])).max()))
        dc, sol = solve_discrete_constrained(s.cashflows, s.prices, op, dates=s.dates, monotone=True, positive=True)
        diff = max(diff, float(np.abs(dc - d).max()) if not sol.active.any() else np.inf)
    ok = errors[0] > errors[1] > errors[2] and diff <= 1e-10
    verdict("C8 discrete convergence", ok, f"max errors {[f'{e:.2e}' for e in errors]}, constrained diff {diff:.1e}")


def test_c09_multicurve():
    mc = build_all(*(data_path(f) for f in MULTI))
    residual = max(float(np.abs(r).max()) for r in mc.residuals().values())
    counts = {k: v.system.n for k, v in [("OIS", mc.discount)] + [(f"{t}M", c) for t, c in mc.forwards.items()]}
    fixings = {6: 0.00342, 3: 0.00227, 1: 0.00129}
    gap = max(abs(mc.forwards[k].at_index(mc.grid, k) - v) for k, v in fixings.items())
    ok = residual <= 1e-8 and gap <= 1e-15
    verdict("C9 multi-curve", ok, f"rows {counts}, max PV residual {residual:.1e}, fixing gap {gap:.1e}")


def test_c10_smoothness_dominance(usd):
    qf, s = usd
    curve = solve(s)
    boot = bootstrap(qf)
    horizon = float(s.dates[-1])
    smooth, rough = roughness(curve, 1 / 365, horizon), roughness(boot, 1 / 365, horizon)
    verdict("C10 smoothness dominance", smooth <= rough, f"pseudoinverse {smooth:.6f} vs bootstrap {rough:.6f}")
