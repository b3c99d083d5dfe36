"""Sequential OIS discounting and tenor forward curves.

Stage one fits the OIS discount curve exactly like a single curve.  Each
later stage fits a ``k``-month simple forward curve ``F_k`` sampled at
``t_k, t_2k, ...`` on a monthly grid.  Every swap condition is linear in the
unknown forwards once the discount curve (and, for basis swaps, the
reference forward curve) is known, so the smoothest forward curve again has
the minimal-norm closed form.  The row ``F_k(t_k) = cash fixing`` takes the
place of the ``g(0) = 1`` row.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curve_solver import DiscountCurve, KernelExpansion, fit, solve
from .errors import CurveError
from .instruments import (
    BasisSwap,
    Conventions,
    DayCount,
    Deposit,
    OvernightIndexSwap,
    ParSwap,
    PricingSystem,
    QuoteFile,
    add_months,
    adjust_following,
    assemble,
    read_quotes,
)

__all__ = [
    "MonthlyGrid",
    "ForwardCurve",
    "MultiCurve",
    "build_ois_curve",
    "build_tenor_curve_from_fixed",
    "build_tenor_curve_from_basis",
    "build_all",
    "leg_value",
]


@dataclass(frozen=True)
class MonthlyGrid:
    """Dates ``t_i = following(origin + i months)``, ``i = 0..months``, with ``t_0 = origin``."""

    origin: dt.date
    months: int = 360
    conventions: Conventions = field(default_factory=Conventions)
    float_daycount: DayCount = DayCount.ACT_360
    fixed_daycount: DayCount = DayCount.THIRTY_360

    def __post_init__(self):
        if self.months < 1:
            raise ValueError("the grid needs at least one month")
        dates = [self.origin] + [adjust_following(add_months(self.origin, i)) for i in range(1, self.months + 1)]
        object.__setattr__(self, "_dates", tuple(dates))
        object.__setattr__(self, "_index", {d: i for i, d in enumerate(dates)})

    @property
    def dates(self):
        return self._dates

    def time(self, i):
        return self.conventions.time(self.origin, self._dates[i])

    def times(self, indices):
        return np.array([self.time(i) for i in indices])

    def index(self, day: dt.date, label=""):
        """Grid index of ``day``; raises if the date is not a grid date."""
        try:
            return self._index[day]
        except KeyError:
            raise CurveError(f"{label or day}: date {day} is not on the monthly grid") from None

    def accrual(self, i, j, daycount=None):
        return (daycount or self.float_daycount).year_fraction(self._dates[i], self._dates[j])


@dataclass(frozen=True)
class ForwardCurve(KernelExpansion):
    """Smoothest ``k``-month forward curve ``F_k(x)``, ``x`` the end of the reference period.

    ``knot_indices`` are the grid indices ``k, 2k, ...`` of the unknowns.
    """

    tenor_months: int = 6
    knot_indices: tuple = ()
    system: PricingSystem | None = field(default=None, repr=False, compare=False)
    solution: object = field(default=None, repr=False, compare=False)

    def at_index(self, grid: MonthlyGrid, i):
        return float(self(grid.time(i)))

    def knot_values(self):
        return self(self.dates)

    def residuals(self):
        """``C f - p`` in present-value units."""
        return self.system.cashflows @ self.knot_values() - self.system.prices

    @property
    def horizon_index(self):
        return self.knot_indices[-1]


def _months(grid, day, label):
    return grid.index(day, label)


def leg_value(grid: MonthlyGrid, discount, tenor, end_index, rates=None, daycount=None):
    """``sum_i delta(t_{k(i-1)}, t_{ki}) g(t_{ki}) r_i`` over ``ki <= end_index``.

    ``rates`` is a callable on grid indices; ``None`` gives the annuity.
    """
    if end_index % tenor:
        raise CurveError(f"maturity index {end_index} is not a multiple of the {tenor}-month tenor")
    total = 0.0
    for i in range(tenor, end_index + 1, tenor):
        weight = grid.accrual(i - tenor, i, daycount) * float(discount(grid.time(i)))
        total += weight * (1.0 if rates is None else rates(i))
    return total


def build_ois_curve(quotes, valuation_date=None, conventions=None) -> DiscountCurve:
    """Smoothest OIS discount curve repricing every overnight-index swap exactly."""
    if isinstance(quotes, QuoteFile):
        instruments, valuation_date = quotes.instruments, quotes.valuation_date
        conventions = conventions or quotes.conventions()
    else:
        instruments = list(quotes)
    bad = [i.label for i in instruments if not isinstance(i, (OvernightIndexSwap, Deposit))]
    if bad:
        raise CurveError(f"{bad[0]!r} is not an OIS quote")
    system = assemble(instruments, valuation_date, conventions)
    return solve(system)


def _check_discount(grid, discount, upto):
    g = np.asarray(discount(grid.times(range(upto + 1))))
    if np.any(g <= 0):
        i = int(np.argmax(g <= 0))
        raise CurveError(f"discount curve is not positive at grid date {grid.dates[i]}")


def _spot_fixing(instruments, tenor, grid):
    cash = [i for i in instruments if isinstance(i, Deposit)]
    if len(cash) != 1:
        raise CurveError(f"expected exactly one {tenor}-month cash fixing, found {len(cash)}")
    dep = cash[0]
    idx = grid.index(dep.end, dep.label)
    if idx != tenor:
        raise CurveError(f"{dep.label}: cash fixing ends at month {idx}, expected month {tenor}")
    return dep


def _solve_forward(grid, tenor, rows, prices, labels, quotes):
    max_index = max(max(r) for r in rows if r) if rows else tenor
    knots = tuple(range(tenor, max_index + 1, tenor))
    col = {k: j for j, k in enumerate(knots)}
    C = np.zeros((len(rows), len(knots)))
    for r, row in enumerate(rows):
        for k, w in row.items():
            C[r, col[k]] += w
    dates = grid.times(knots)
    system = PricingSystem(
        dates=dates,
        cashflows=C,
        prices=np.asarray(prices, dtype=float),
        labels=tuple(labels),
        quotes=np.asarray(quotes, dtype=float),
        quote_sensitivity=np.zeros_like(C),
        quote_enters=("fixed",) + ("price",) * (len(rows) - 1),
        column_dates=tuple(grid.dates[k] for k in knots),
        origin=grid.origin,
    )
    sol = fit(dates, C, system.prices, labels=system.labels)
    return ForwardCurve(dates, sol.weights, 0.0, tenor, knots, system, sol)


def build_tenor_curve_from_fixed(grid: MonthlyGrid, discount, instruments, tenor=6) -> ForwardCurve:
    """Smoothest ``tenor``-month forward curve from fixed-versus-floating par swaps.

    Each swap gives ``K * fixed annuity = sum delta g F_k``; the cash fixing
    gives ``F_k(t_k)``.
    """
    instruments = list(instruments)
    dep = _spot_fixing(instruments, tenor, grid)
    rows, prices, labels, quotes = [{tenor: 1.0}], [dep.rate], [dep.label], [dep.rate]
    for sw in instruments:
        if isinstance(sw, Deposit):
            continue
        if not isinstance(sw, ParSwap):
            raise CurveError(f"{sw.label!r} is not a fixed-versus-floating swap")
        if sw.float_frequency not in (None, 12 // tenor):
            raise CurveError(f"{sw.label}: floating leg pays {sw.float_frequency}x a year, not every {tenor} months")
        end = _months(grid, sw.end, sw.label)
        fixed_step = 12 // sw.frequency
        _check_discount(grid, discount, end)
        annuity = leg_value(grid, discount, fixed_step, end, daycount=grid.fixed_daycount)
        row = {}
        for i in range(tenor, end + 1, tenor):
            row[i] = grid.accrual(i - tenor, i) * float(discount(grid.time(i)))
        if end % tenor:
            raise CurveError(f"{sw.label}: maturity is not a multiple of {tenor} months")
        rows.append(row)
        prices.append(sw.rate * annuity)
        labels.append(sw.label)
        quotes.append(sw.rate)
    return _solve_forward(grid, tenor, rows, prices, labels, quotes)


def build_tenor_curve_from_basis(grid: MonthlyGrid, discount, reference: ForwardCurve, instruments, tenor) -> ForwardCurve:
    """Smoothest ``tenor``-month forward curve from basis swaps against ``reference``.

    The spread sits on the shorter leg:
    ``sum delta g F_ref - S * annuity_k = sum delta g F_k``.

    Raises
    ------
    CurveError
        If a swap runs past the last knot of the reference curve; the message
        names the shortfall in months.
    """
    instruments = list(instruments)
    dep = _spot_fixing(instruments, tenor, grid)
    rows, prices, labels, quotes = [{tenor: 1.0}], [dep.rate], [dep.label], [dep.rate]
    ref_tenor = reference.tenor_months
    for bs in instruments:
        if isinstance(bs, Deposit):
            continue
        if not isinstance(bs, BasisSwap):
            raise CurveError(f"{bs.label!r} is not a basis swap")
        if 12 // bs.frequency != tenor or 12 // bs.ref_frequency != ref_tenor:
            raise CurveError(
                f"{bs.label}: legs are {12 // bs.frequency}M/{12 // bs.ref_frequency}M, "
                f"expected {tenor}M/{ref_tenor}M"
            )
        end = _months(grid, bs.end, bs.label)
        if end > reference.horizon_index:
            raise CurveError(
                f"{bs.label}: matures at month {end} but the {ref_tenor}M reference curve stops at "
                f"month {reference.horizon_index} ({end - reference.horizon_index} months short)"
            )
        _check_discount(grid, discount, end)
        ref_leg = leg_value(grid, discount, ref_tenor, end, rates=lambda i: reference.at_index(grid, i))
        annuity = leg_value(grid, discount, tenor, end)
        row = {i: grid.accrual(i - tenor, i) * float(discount(grid.time(i))) for i in range(tenor, end + 1, tenor)}
        rows.append(row)
        prices.append(ref_leg - bs.spread * annuity)
        labels.append(bs.label)
        quotes.append(bs.spread)
    return _solve_forward(grid, tenor, rows, prices, labels, quotes)


@dataclass(frozen=True)
class MultiCurve:
    """Result of the staged build: the discount curve and forward curves keyed by tenor."""

    grid: MonthlyGrid
    discount: DiscountCurve
    forwards: dict
    sources: dict

    def residuals(self):
        out = {"OIS": np.asarray(self.discount.repricing_residuals())}
        for tenor, curve in self.forwards.items():
            out[f"{tenor}M"] = curve.residuals()
        return out

    def export(self, directory):
        """One ``x,value`` CSV per curve on the monthly grid and a JSON manifest."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = []
        times = self.grid.times(range(self.grid.months + 1))
        name = "ois_discount.csv"
        _write_xy(directory / name, times, self.discount(times))
        files.append({"stage": 1, "curve": "OIS discount", "file": name, "quotes": self.sources.get("OIS")})
        for stage, (tenor, curve) in enumerate(self.forwards.items(), start=2):
            idx = [i for i in curve.knot_indices]
            name = f"forward_{tenor}m.csv"
            _write_xy(directory / name, self.grid.times(idx), curve(self.grid.times(idx)))
            files.append(
                {"stage": stage, "curve": f"{tenor}M forward", "file": name, "quotes": self.sources.get(f"{tenor}M")}
            )
        manifest = {"origin": self.grid.origin.isoformat(), "months": self.grid.months, "stages": files}
        with open(directory / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
        return directory / "manifest.json"


def _write_xy(path, x, y):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "value"])
        for a, b in zip(x, y):
            out.writerow([f"{a:.17g}", f"{b:.17g}"])


def _load(source):
    return source if isinstance(source, QuoteFile) else read_quotes(source)


def build_all(ois, fixed6m, basis3m6m, basis1m, months=360, one_month_reference=3) -> MultiCurve:
    """Run the four stages: OIS, 6M from fixed swaps, 3M from 3M-6M, 1M from 1M basis swaps.

    ``one_month_reference`` selects the reference leg of the 1M basis swaps:
    ``3`` for 1M-3M quotes, ``6`` for 1M-6M quotes.
    """
    if one_month_reference not in (3, 6):
        raise ValueError("the 1M basis reference must be the 3M or the 6M curve")
    files = {"OIS": ois, "6M": fixed6m, "3M": basis3m6m, "1M": basis1m}
    quotes = {key: _load(src) for key, src in files.items()}
    conv = quotes["OIS"].conventions()
    dates = {q.valuation_date for q in quotes.values()}
    if len(dates) != 1:
        raise CurveError(f"quote files disagree on the valuation date: {sorted(dates)}")
    discount = build_ois_curve(quotes["OIS"])
    grid = MonthlyGrid(conv.origin(quotes["OIS"].valuation_date), months, conv)
    f6 = build_tenor_curve_from_fixed(grid, discount, quotes["6M"].instruments, 6)
    f3 = build_tenor_curve_from_basis(grid, discount, f6, quotes["3M"].instruments, 3)
    ref = f3 if one_month_reference == 3 else f6
    f1 = build_tenor_curve_from_basis(grid, discount, ref, quotes["1M"].instruments, 1)
    sources = {k: str(q.path) if q.path else None for k, q in quotes.items()}
    return MultiCurve(grid, discount, {6: f6, 3: f3, 1: f1}, sources)
