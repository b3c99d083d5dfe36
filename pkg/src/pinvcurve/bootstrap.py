"""Traditional single-curve bootstrap, kept as a comparison baseline.

Deposits give the short pillars directly.  The spot rate at the first
futures reset is interpolated linearly between the bracketing deposits, the
futures chain is rolled forward as simple forwards, and the annual swap
pillars follow from the par-rate recursion with missing swap rates
interpolated linearly in maturity.  Between pillars the continuously
compounded zero yield is interpolated linearly.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import CurveError
from .instruments import Conventions, Deposit, ForwardRateAgreement, ParSwap, QuoteFile

__all__ = ["BootstrapCurve", "bootstrap", "roughness", "interpolation_weight"]


@dataclass(frozen=True)
class BootstrapCurve:
    """Pillar discount factors with linear interpolation of zero yields.

    ``times`` starts at 0 with factor 1.  Zero yields are held flat before
    the first positive pillar and after the last one.
    """

    times: np.ndarray
    factors: np.ndarray
    dates: tuple = ()
    forward_step: float = 1.0 / 3650.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        g = np.asarray(self.factors, dtype=float)
        if t.shape != g.shape or t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two pillars")
        if t[0] != 0.0 or g[0] != 1.0:
            raise ValueError("the first pillar must be g(0) = 1")
        if np.any(np.diff(t) <= 0) or np.any(g <= 0):
            raise ValueError("pillars must be increasing with positive factors")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "factors", g)

    @property
    def pillar_yields(self):
        return -np.log(self.factors[1:]) / self.times[1:]

    def zero_yield(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.times[1:], self.pillar_yields)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-self.zero_yield(x) * x)
        return float(out) if out.ndim == 0 else out

    def forward(self, x):
        """First-order forward difference of ``-ln g`` with step ``forward_step``."""
        x = np.asarray(x, dtype=float)
        h = self.forward_step
        return (self.zero_yield(x + h) * (x + h) - self.zero_yield(x) * x) / h

    def export(self, path, grid):
        """Same layout as the pseudoinverse curve export: ``x,discount,zero_yield,forward``."""
        grid = np.asarray(grid, dtype=float)
        y = self.zero_yield(grid)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["x", "discount", "zero_yield", "forward"])
            for row in zip(grid, self(grid), y, self.forward(grid)):
                out.writerow([f"{v:.17g}" for v in row])


def interpolation_weight(daycount, left: dt.date, target: dt.date, right: dt.date):
    """``w`` with ``L(target) = w L(left) + (1 - w) L(right)``."""
    if not left < target < right:
        raise CurveError(f"{target} is not strictly between {left} and {right}")
    return daycount.year_fraction(target, right) / daycount.year_fraction(left, right)


def _spot_rate(mm, origin, day, g):
    return (1.0 / g - 1.0) / mm.year_fraction(origin, day)


def _interpolated_factor(mm, origin, known: dict, day: dt.date):
    earlier = [d for d in known if d < day and d > origin]
    later = [d for d in known if d > day]
    if not earlier or not later:
        raise CurveError(f"no bracketing pillars around {day}: instrument chain ordering violated")
    left, right = max(earlier), min(later)
    w = interpolation_weight(mm, left, day, right)
    rate = w * _spot_rate(mm, origin, left, known[left]) + (1.0 - w) * _spot_rate(mm, origin, right, known[right])
    return 1.0 / (1.0 + mm.year_fraction(origin, day) * rate)


def bootstrap(quotes: QuoteFile | list, valuation_date: dt.date | None = None, conventions: Conventions | None = None):
    """Bootstrap deposits, a contiguous futures/FRA chain and annual par swaps.

    Raises
    ------
    CurveError
        If the instruments do not form the expected date chain: the first
        futures reset must lie between two deposit maturities, the chain must
        be contiguous, and the first swap date must fall inside the chain.
    """
    if isinstance(quotes, QuoteFile):
        instruments = quotes.instruments
        valuation_date = quotes.valuation_date
        conventions = conventions or quotes.conventions()
    else:
        instruments = list(quotes)
        if valuation_date is None:
            raise ValueError("valuation_date is required with a plain instrument list")
    conv = conventions or Conventions()
    origin = conv.origin(valuation_date)
    mm = conv.money_market

    deposits = sorted((i for i in instruments if isinstance(i, Deposit)), key=lambda i: i.end)
    futures = sorted((i for i in instruments if isinstance(i, ForwardRateAgreement)), key=lambda i: i.start)
    swaps = sorted((i for i in instruments if isinstance(i, ParSwap)), key=lambda i: i.end)
    if not deposits:
        raise CurveError("the bootstrap needs at least one deposit")

    known: dict[dt.date, float] = {}
    for dep in deposits:
        if dep.start not in (None, origin):
            raise CurveError(f"{dep.label}: deposits must start at the curve origin")
        delta = (dep.daycount or mm).year_fraction(origin, dep.end)
        known[dep.end] = 1.0 / (1.0 + delta * dep.rate)

    if futures:
        first = futures[0].start
        if first not in known:
            known[first] = _interpolated_factor(mm, origin, known, first)
        for prev, fut in zip([None] + futures[:-1], futures):
            if prev is not None and fut.start != prev.end:
                raise CurveError(f"{fut.label}: futures chain has a gap between {prev.end} and {fut.start}")
            delta = (fut.daycount or mm).year_fraction(fut.start, fut.end)
            known[fut.end] = known[fut.start] / (1.0 + delta * fut.rate)

    if swaps:
        longest = swaps[-1]
        start, pay_dates = longest.fixed_dates(origin)
        if start != origin:
            raise CurveError("swaps must start at the curve origin")
        dc = longest._daycount(conv)
        quoted = {}
        for sw in swaps:
            if sw.frequency != longest.frequency or sw.end not in pay_dates:
                raise CurveError(f"{sw.label}: maturity is not on the annual swap date chain")
            quoted[sw.end] = sw.rate
        axis = np.array([conv.time(origin, d) for d in pay_dates])
        first = pay_dates[0]
        if first not in known:
            known[first] = _interpolated_factor(mm, origin, known, first)
        # The first annual swap rate implied by its discount factor joins the interpolation nodes.
        d0 = dc.year_fraction(origin, first)
        if first not in quoted:
            quoted[first] = (1.0 - known[first]) / (d0 * known[first])
        nodes = sorted(quoted)
        node_t = np.array([conv.time(origin, d) for d in nodes])
        node_r = np.array([quoted[d] for d in nodes])
        if axis[-1] > node_t[-1] + 1e-12:
            raise CurveError("longest swap does not end on a quoted maturity")
        annuity = d0 * known[first]
        prev = first
        for day, t in zip(pay_dates[1:], axis[1:]):
            rate = quoted.get(day, float(np.interp(t, node_t, node_r)))
            delta = dc.year_fraction(prev, day)
            known[day] = (1.0 - rate * annuity) / (1.0 + rate * delta)
            annuity += delta * known[day]
            prev = day

    days = sorted(known)
    times = np.array([0.0] + [conv.time(origin, d) for d in days])
    factors = np.array([1.0] + [known[d] for d in days])
    return BootstrapCurve(times, factors, tuple(days))


def roughness(curve, step, horizon=None):
    """Discrete ``g(0)^2 + g'(0)^2 + sum (D2 g / step^2)^2 step`` on ``0, step, ..., horizon``.

    ``curve`` is any callable returning discount factors.  ``g'(0)`` is the
    forward difference ``(g(step) - g(0)) / step``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if horizon is None:
        horizon = float(np.max(getattr(curve, "times", getattr(curve, "dates", [step * 2]))))
    count = int(np.floor(horizon / step + 1e-9)) + 1
    if count < 3:
        raise ValueError("the sampling grid needs at least three points")
    u = step * np.arange(count)
    g = np.asarray(curve(u), dtype=float)
    slope = (g[1] - g[0]) / step
    second = np.diff(g, 2) / step**2
    return float(g[0] ** 2 + slope**2 + np.sum(second**2) * step)
