"""Benchmark instruments, day counts and assembly of the pricing system ``C d = p``.

Every instrument is reduced to dated cashflows.  ``assemble`` merges the
cashflow dates of all instruments into one sorted axis of year fractions,
prepends the ``g(0) = 1`` row and checks that the resulting matrix has full
row rank.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
from dateutil.relativedelta import relativedelta

from .errors import ArbitrageError, QuoteParseError, RankDeficientError

__all__ = [
    "DayCount",
    "year_fraction",
    "adjust_following",
    "add_business_days",
    "add_months",
    "schedule",
    "Conventions",
    "Cashflow",
    "UnitConstraint",
    "CouponBond",
    "Deposit",
    "ForwardRateAgreement",
    "ParSwap",
    "OvernightIndexSwap",
    "BasisSwap",
    "PricingSystem",
    "assemble",
    "cashflow_row",
    "check_rank",
    "QuoteFile",
    "read_quotes",
]

DATE_DECIMALS = 12


class DayCount(Enum):
    ACT_360 = "ACT/360"
    ACT_365F = "ACT/365F"
    THIRTY_360 = "30/360"

    @classmethod
    def parse(cls, text):
        key = text.strip().upper().replace(" ", "")
        aliases = {
            "ACT/360": cls.ACT_360,
            "A360": cls.ACT_360,
            "ACT/365F": cls.ACT_365F,
            "ACT/365": cls.ACT_365F,
            "ACT/365FIXED": cls.ACT_365F,
            "A365F": cls.ACT_365F,
            "30/360": cls.THIRTY_360,
            "30/360US": cls.THIRTY_360,
            "30U/360": cls.THIRTY_360,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown day count convention {text!r}") from None

    def year_fraction(self, start: dt.date, end: dt.date) -> float:
        return year_fraction(self, start, end)


def year_fraction(dc: DayCount, start: dt.date, end: dt.date) -> float:
    """Accrual fraction between two calendar dates.

    30/360 follows the US bond-basis rule: a day-31 start becomes 30, and a
    day-31 end becomes 30 when the start is on day 30 or 31.
    """
    if end < start:
        raise ValueError(f"end date {end} precedes start date {start}")
    if dc is DayCount.ACT_360:
        return (end - start).days / 360.0
    if dc is DayCount.ACT_365F:
        return (end - start).days / 365.0
    if dc is DayCount.THIRTY_360:
        d1 = min(start.day, 30)
        d2 = min(end.day, 30) if d1 == 30 else end.day
        days = 360 * (end.year - start.year) + 30 * (end.month - start.month) + (d2 - d1)
        return days / 360.0
    raise ValueError(f"unsupported day count {dc!r}")


def adjust_following(day: dt.date) -> dt.date:
    """Roll a weekend date forward to Monday; no holiday calendar."""
    return np.busday_offset(np.datetime64(day, "D"), 0, roll="forward").astype(dt.date)


def add_business_days(day: dt.date, n: int) -> dt.date:
    return np.busday_offset(np.datetime64(day, "D"), n, roll="forward").astype(dt.date)


def add_months(day: dt.date, months: int) -> dt.date:
    return day + relativedelta(months=months)


def _months_between(start: dt.date, end: dt.date) -> int:
    months = 12 * (end.year - start.year) + end.month - start.month
    if end.day < start.day - 3:
        months -= 1
    return months


def schedule(start: dt.date, end: dt.date, frequency: int) -> list[dt.date]:
    """Payment dates after ``start`` rolling forward by ``12 / frequency`` months.

    Intermediate dates are adjusted with the following convention; the last
    date is ``end`` as given.  ``frequency == 0`` means a single payment at
    ``end``.
    """
    if end <= start:
        raise ValueError(f"schedule end {end} is not after start {start}")
    if frequency == 0:
        return [end]
    if frequency < 0 or 12 % frequency:
        raise ValueError(f"frequency must divide 12, got {frequency}")
    step = 12 // frequency
    periods = max(1, round(_months_between(start, end) / step))
    dates = [adjust_following(add_months(start, k * step)) for k in range(1, periods)]
    dates.append(end)
    if any(b <= a for a, b in zip([start] + dates, dates)):
        raise ValueError(f"degenerate schedule from {start} to {end}")
    return dates


@dataclass(frozen=True)
class Conventions:
    """Market conventions used when turning instruments into cashflows.

    ``spot_lag`` business days after the valuation date defines time zero
    of the curve axis, which is measured with ``time_axis``.
    """

    spot_lag: int = 2
    time_axis: DayCount = DayCount.ACT_365F
    money_market: DayCount = DayCount.ACT_360
    swap_fixed: DayCount = DayCount.THIRTY_360
    ois: DayCount = DayCount.ACT_360

    def origin(self, valuation_date: dt.date) -> dt.date:
        if self.spot_lag == 0:
            return valuation_date
        return add_business_days(valuation_date, self.spot_lag)

    def time(self, origin: dt.date, day: dt.date) -> float:
        return self.time_axis.year_fraction(origin, day)


@dataclass(frozen=True)
class Cashflow:
    """A dated amount; ``dquote`` is the amount's derivative w.r.t. the instrument's rate."""

    date: dt.date
    amount: float
    dquote: float = 0.0


@dataclass(frozen=True)
class UnitConstraint:
    """The ``g(0) = 1`` row: price 1, cashflow 1 at time zero."""

    label: str = "g(0)=1"
    kind = "unit"
    quote_enters = "fixed"

    @property
    def price(self):
        return 1.0

    @property
    def quote(self):
        return float("nan")

    def cashflows(self, origin, conventions):
        return [Cashflow(origin, 1.0)]


@dataclass(frozen=True)
class CouponBond:
    """Bullet bond on 100 notional quoted by dirty price.

    ``coupon`` is the annual rate in percent.  Coupon dates roll backwards
    from ``maturity`` to ``next_coupon`` without business-day adjustment.
    """

    label: str
    coupon: float
    frequency: int
    next_coupon: dt.date
    maturity: dt.date
    dirty_price: float
    kind = "bond"
    quote_enters = "price"

    @property
    def price(self):
        return self.dirty_price

    @property
    def quote(self):
        return self.coupon

    def coupon_dates(self):
        if self.frequency <= 0 or 12 % self.frequency:
            raise ValueError(f"{self.label}: bond frequency must divide 12")
        step = 12 // self.frequency
        dates = []
        k = 0
        while True:
            day = add_months(self.maturity, -k * step)
            if day < self.next_coupon:
                break
            dates.append(day)
            k += 1
        if not dates or dates[-1] != self.next_coupon:
            raise ValueError(
                f"{self.label}: next coupon {self.next_coupon} is not on the "
                f"schedule rolling back from {self.maturity}"
            )
        return dates[::-1]

    def cashflows(self, origin, conventions):
        per = 1.0 / self.frequency
        flows = [Cashflow(d, self.coupon * per, per) for d in self.coupon_dates()]
        last = flows[-1]
        flows[-1] = Cashflow(last.date, last.amount + 100.0, last.dquote)
        return flows


@dataclass(frozen=True)
class Deposit:
    """Cash deposit from time zero: price 1, pays ``1 + delta * rate`` at ``end``."""

    label: str
    rate: float
    end: dt.date
    start: dt.date | None = None
    daycount: DayCount | None = None
    kind = "deposit"
    quote_enters = "rate"

    @property
    def price(self):
        return 1.0

    @property
    def quote(self):
        return self.rate

    def cashflows(self, origin, conventions):
        start = origin if self.start is None else self.start
        if start != origin:
            raise ValueError(
                f"{self.label}: deposit starts {start}, not at the curve origin {origin}; "
                "quote it as an FRA instead"
            )
        delta = (self.daycount or conventions.money_market).year_fraction(start, self.end)
        return [Cashflow(self.end, 1.0 + delta * self.rate, delta)]


@dataclass(frozen=True)
class ForwardRateAgreement:
    """Simple forward rate over ``[start, end]``: price 0, -1 at start, ``1 + delta * F`` at end.

    Futures are mapped here with ``F = 1 - price / 100`` and no convexity adjustment.
    """

    label: str
    rate: float
    start: dt.date
    end: dt.date
    daycount: DayCount | None = None
    kind: str = "fra"
    quote_enters = "rate"

    @classmethod
    def from_futures_price(cls, label, price, start, end, daycount=None):
        rate = float((Decimal(str(price)) - Decimal(100)) / Decimal(-100))
        return cls(label, rate, start, end, daycount, kind="futures")

    @property
    def price(self):
        return 0.0

    @property
    def quote(self):
        return self.rate

    def cashflows(self, origin, conventions):
        delta = (self.daycount or conventions.money_market).year_fraction(self.start, self.end)
        return [Cashflow(self.start, -1.0), Cashflow(self.end, 1.0 + delta * self.rate, delta)]


@dataclass(frozen=True)
class ParSwap:
    """Par swap seen as its fixed leg plus notional: price 1 at its start date.

    Cashflows are ``delta_j * rate`` on each fixed date and ``1 + delta * rate``
    at maturity.  ``float_frequency`` is only used by the multi-curve builder.
    """

    label: str
    rate: float
    end: dt.date
    start: dt.date | None = None
    frequency: int = 1
    daycount: DayCount | None = None
    float_frequency: int | None = None
    kind = "swap"
    quote_enters = "rate"

    @property
    def price(self):
        return 1.0

    @property
    def quote(self):
        return self.rate

    def _daycount(self, conventions):
        return self.daycount or conventions.swap_fixed

    def fixed_dates(self, origin):
        start = origin if self.start is None else self.start
        return start, schedule(start, self.end, self.frequency)

    def cashflows(self, origin, conventions):
        start, dates = self.fixed_dates(origin)
        if start != origin:
            raise ValueError(f"{self.label}: forward-starting swaps are not supported")
        dc = self._daycount(conventions)
        flows = []
        prev = start
        for day in dates:
            delta = dc.year_fraction(prev, day)
            flows.append(Cashflow(day, delta * self.rate, delta))
            prev = day
        last = flows[-1]
        flows[-1] = Cashflow(last.date, last.amount + 1.0, last.dquote)
        return flows


@dataclass(frozen=True)
class OvernightIndexSwap(ParSwap):
    """OIS priced off its own curve; ``frequency = 0`` is a single payment at maturity."""

    kind = "ois"

    def _daycount(self, conventions):
        return self.daycount or conventions.ois


@dataclass(frozen=True)
class BasisSwap:
    """Tenor basis swap: ``spread`` added to the leg paying ``frequency`` times a year.

    Only meaningful for the multi-curve builder; it has no single-curve cashflows.
    """

    label: str
    spread: float
    end: dt.date
    start: dt.date | None = None
    frequency: int = 4
    ref_frequency: int = 2
    kind = "basis"
    quote_enters = "rate"

    @property
    def quote(self):
        return self.spread

    @property
    def price(self):
        raise TypeError(f"{self.label}: basis swaps have no single-curve price")

    def cashflows(self, origin, conventions):
        raise TypeError(f"{self.label}: basis swaps have no single-curve cashflows")


@dataclass(frozen=True)
class PricingSystem:
    """Linear pricing constraints ``C d = p`` on the merged cashflow dates.

    Attributes
    ----------
    dates : (N,) year fractions, strictly increasing, ``dates[0] == 0``
    cashflows : (n, N) matrix ``C``
    prices : (n,) vector ``p``
    labels : instrument names per row
    quotes : (n,) rate-type parameter per row (fixed rate, or coupon in % for bonds)
    quote_sensitivity : (n, N) derivative of row ``i`` of ``C`` w.r.t. ``quotes[i]``
    quote_enters : per row, ``"price"``, ``"rate"`` or ``"fixed"``
    """

    dates: np.ndarray
    cashflows: np.ndarray
    prices: np.ndarray
    labels: tuple[str, ...]
    quotes: np.ndarray
    quote_sensitivity: np.ndarray
    quote_enters: tuple[str, ...]
    column_dates: tuple[dt.date, ...] | None = None
    origin: dt.date | None = None
    instruments: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        for name in ("dates", "cashflows", "prices", "quotes", "quote_sensitivity"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n, N = self.cashflows.shape
        if self.prices.shape != (n,) or self.dates.shape != (N,):
            raise ValueError("inconsistent pricing-system dimensions")
        if self.quote_sensitivity.shape != (n, N) or self.quotes.shape != (n,):
            raise ValueError("inconsistent quote-sensitivity dimensions")
        if len(self.labels) != n or len(self.quote_enters) != n:
            raise ValueError("one label and one quote type per row required")
        if n > N:
            raise RankDeficientError(f"{n} instruments but only {N} cashflow dates")

    @property
    def n(self):
        return self.cashflows.shape[0]

    @property
    def N(self):
        return self.cashflows.shape[1]

    def row(self, label):
        return self.labels.index(label)

    def with_prices(self, prices):
        return replace(self, prices=np.asarray(prices, dtype=float))

    def with_quotes(self, quotes):
        """Rebuild ``C`` for new rate quotes; rows depend linearly on their quote."""
        quotes = np.asarray(quotes, dtype=float)
        change = np.where(np.isnan(self.quotes), 0.0, np.nan_to_num(quotes) - np.nan_to_num(self.quotes))
        C = self.cashflows + change[:, None] * self.quote_sensitivity
        return replace(self, cashflows=C, quotes=quotes)

    def residuals(self, discount_factors):
        return self.cashflows @ np.asarray(discount_factors, dtype=float) - self.prices


def check_rank(C, labels, prices=None, rtol=1e-10):
    """Raise if ``C`` lacks full row rank.

    Rank is read off a column-pivoted QR of ``C.T`` with threshold
    ``rtol * ||C||``.  A dependent row is reported by label; when its price
    disagrees with the replicating combination of the other rows the error is
    an :class:`ArbitrageError`.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if n == 0:
        raise ValueError("empty cashflow matrix")
    _, R, piv = scipy.linalg.qr(C.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = np.linalg.norm(C, 2)
    rank = int(np.sum(diag > rtol * scale))
    if rank == n:
        return
    basis = np.sort(piv[:rank])
    redundant = int(piv[rank])
    label = labels[redundant]
    if prices is not None:
        coef, *_ = np.linalg.lstsq(C[basis].T, C[redundant], rcond=None)
        replicated = float(coef @ np.asarray(prices)[basis])
        price = float(prices[redundant])
        if abs(replicated - price) > 1e-8 * max(1.0, abs(price)):
            raise ArbitrageError(
                f"instrument {label!r} is replicable by other instruments at price "
                f"{replicated:.10g} but quoted at {price:.10g}",
                label=label,
            )
    raise RankDeficientError(
        f"cashflow matrix has rank {rank} < {n}: instrument {label!r} is redundant",
        label=label,
    )


def _date_key(x):
    return round(x, DATE_DECIMALS)


def cashflow_row(instrument, dates, conventions, origin):
    """Row of ``C`` and its quote derivative for one instrument on a given date axis.

    Raises ``ValueError`` if a cashflow date is not on ``dates``.
    """
    dates = np.asarray(dates, dtype=float)
    index = {_date_key(x): j for j, x in enumerate(dates)}
    row = np.zeros(dates.size)
    drow = np.zeros(dates.size)
    for cf in instrument.cashflows(origin, conventions):
        key = _date_key(conventions.time(origin, cf.date))
        if key not in index:
            raise ValueError(f"{instrument.label}: cashflow date {cf.date} is not on the date grid")
        row[index[key]] += cf.amount
        drow[index[key]] += cf.dquote
    return row, drow


def assemble(instruments: Sequence, valuation_date: dt.date, conventions: Conventions | None = None):
    """Build the pricing system for ``instruments``.

    A :class:`UnitConstraint` is prepended unless one is present.  Cashflows
    falling on the same year fraction (after rounding to 1e-12) share one
    column.  Raises :class:`RankDeficientError` or :class:`ArbitrageError`
    for redundant rows.
    """
    conventions = conventions or Conventions()
    instruments = list(instruments)
    if not instruments:
        raise ValueError("at least one instrument is required")
    units = [i for i in instruments if isinstance(i, UnitConstraint)]
    others = [i for i in instruments if not isinstance(i, UnitConstraint)]
    if len(units) > 1:
        raise RankDeficientError("more than one g(0)=1 constraint", label=units[1].label)
    instruments = [units[0] if units else UnitConstraint()] + others

    origin = conventions.origin(valuation_date)
    flows = []
    keys = {}
    for i, instr in enumerate(instruments):
        for cf in instr.cashflows(origin, conventions):
            if cf.date < origin:
                raise ValueError(f"{instr.label}: cashflow on {cf.date} precedes curve origin {origin}")
            key = _date_key(conventions.time(origin, cf.date))
            keys.setdefault(key, cf.date)
            flows.append((i, key, cf.amount, cf.dquote))

    dates = np.array(sorted(keys))
    col = {k: j for j, k in enumerate(dates)}
    n, N = len(instruments), dates.size
    C = np.zeros((n, N))
    dC = np.zeros((n, N))
    for i, key, amount, dquote in flows:
        C[i, col[key]] += amount
        dC[i, col[key]] += dquote

    keep = np.any(C != 0, axis=0) | np.any(dC != 0, axis=0)
    keep[0] = True
    C, dC, dates = C[:, keep], dC[:, keep], dates[keep]
    labels = tuple(i.label for i in instruments)
    if len(set(labels)) != len(labels):
        raise ValueError("instrument labels must be unique")
    prices = np.array([i.price for i in instruments], dtype=float)
    check_rank(C, labels, prices)
    return PricingSystem(
        dates=dates,
        cashflows=C,
        prices=prices,
        labels=labels,
        quotes=np.array([i.quote for i in instruments], dtype=float),
        quote_sensitivity=dC,
        quote_enters=tuple(i.quote_enters for i in instruments),
        column_dates=tuple(keys[k] for k in dates),
        origin=origin,
        instruments=tuple(instruments),
    )


# ---------------------------------------------------------------- quote files

COLUMNS = ("kind", "label", "quote", "unit", "start_date", "end_date", "frequency", "daycount")
OPTIONAL_COLUMNS = ("coupon", "next_coupon", "ref_frequency")
UNIT_SCALE = {"pct": Decimal("0.01"), "bps": Decimal("0.0001"), "price": Decimal(1)}


@dataclass(frozen=True)
class QuoteFile:
    """Parsed quote file: instruments plus ``# key: value`` header directives."""

    instruments: tuple
    valuation_date: dt.date | None = None
    spot_lag: int | None = None
    path: str | None = None

    def conventions(self, base: Conventions | None = None):
        base = base or Conventions()
        if self.spot_lag is None:
            return base
        return replace(base, spot_lag=self.spot_lag)

    def of_kind(self, *kinds):
        return [i for i in self.instruments if i.kind in kinds]


def _parse_date(text, line, what, required=True):
    text = (text or "").strip()
    if not text:
        if required:
            raise QuoteParseError(f"missing {what}", line)
        return None
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise QuoteParseError(f"bad {what} {text!r}, expected YYYY-MM-DD", line) from None


def _parse_decimal(text, line, what):
    try:
        value = Decimal((text or "").strip())
    except InvalidOperation:
        raise QuoteParseError(f"bad {what} {text!r}", line) from None
    if not value.is_finite():
        raise QuoteParseError(f"non-finite {what}", line)
    return value


def _parse_int(text, line, what, default=None):
    text = (text or "").strip()
    if not text:
        if default is None:
            raise QuoteParseError(f"missing {what}", line)
        return default
    try:
        return int(text)
    except ValueError:
        raise QuoteParseError(f"bad {what} {text!r}", line) from None


def _instrument_from_record(rec, line):
    kind = (rec.get("kind") or "").strip().lower()
    label = (rec.get("label") or "").strip()
    if not label:
        raise QuoteParseError("missing label", line)
    unit = (rec.get("unit") or "").strip().lower()
    if unit not in UNIT_SCALE:
        raise QuoteParseError(f"unit must be one of {sorted(UNIT_SCALE)}, got {unit!r}", line)
    raw = _parse_decimal(rec.get("quote"), line, "quote")
    start = _parse_date(rec.get("start_date"), line, "start_date", required=False)
    end = _parse_date(rec.get("end_date"), line, "end_date")
    dc_text = (rec.get("daycount") or "").strip()
    try:
        daycount = DayCount.parse(dc_text) if dc_text else None
    except ValueError as exc:
        raise QuoteParseError(str(exc), line) from None

    def rate():
        if unit == "price":
            raise QuoteParseError(f"{kind} quotes must be given in pct or bps", line)
        return float(raw * UNIT_SCALE[unit])

    try:
        if kind == "bond":
            if unit != "price":
                raise QuoteParseError("bond quotes must be dirty prices (unit=price)", line)
            coupon = _parse_decimal(rec.get("coupon"), line, "coupon")
            return CouponBond(
                label,
                float(coupon),
                _parse_int(rec.get("frequency"), line, "frequency", default=2),
                _parse_date(rec.get("next_coupon"), line, "next_coupon"),
                end,
                float(raw),
            )
        if kind == "deposit":
            return Deposit(label, rate(), end, start, daycount)
        if kind == "fra":
            if start is None:
                raise QuoteParseError("fra requires start_date", line)
            return ForwardRateAgreement(label, rate(), start, end, daycount)
        if kind == "futures":
            if start is None:
                raise QuoteParseError("futures require start_date", line)
            if unit == "price":
                return ForwardRateAgreement.from_futures_price(label, raw, start, end, daycount)
            return ForwardRateAgreement(label, rate(), start, end, daycount, kind="futures")
        if kind in ("swap", "ois"):
            cls = ParSwap if kind == "swap" else OvernightIndexSwap
            ref = (rec.get("ref_frequency") or "").strip()
            return cls(
                label,
                rate(),
                end,
                start,
                _parse_int(rec.get("frequency"), line, "frequency", default=1),
                daycount,
                int(ref) if ref else None,
            )
        if kind == "basis":
            return BasisSwap(
                label,
                rate(),
                end,
                start,
                _parse_int(rec.get("frequency"), line, "frequency"),
                _parse_int(rec.get("ref_frequency"), line, "ref_frequency", default=2),
            )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, QuoteParseError):
            raise
        raise QuoteParseError(str(exc), line) from None
    raise QuoteParseError(f"unknown instrument kind {kind!r}", line)


def read_quotes(source) -> QuoteFile:
    """Parse a quote CSV from a path or a file-like object.

    Lines starting with ``#`` are comments; ``# valuation_date: YYYY-MM-DD``
    and ``# spot_lag: N`` are read as directives.  Quotes are parsed as
    decimal strings and scaled once by their unit (pct, bps or price).
    """
    path = None
    if hasattr(source, "read"):
        text = source.read()
    else:
        path = str(source)
        text = Path(source).read_text()

    directives = {}
    body = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        stripped = raw_line.strip()
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition(":")
            if sep:
                directives[key.strip().lower()] = (value.strip(), lineno)
            continue
        if stripped:
            body.append((lineno, raw_line))
    if not body:
        raise QuoteParseError("quote file has no header or instruments", 1)

    header_line, header = body[0]
    reader = csv.reader(io.StringIO(header))
    names = [c.strip().lower() for c in next(reader)]
    missing = [c for c in COLUMNS if c not in names]
    if missing:
        raise QuoteParseError(f"header lacks columns {missing}", header_line)
    unknown = [c for c in names if c not in COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise QuoteParseError(f"unknown columns {unknown}", header_line)

    instruments = []
    for lineno, raw_line in body[1:]:
        values = next(csv.reader(io.StringIO(raw_line)))
        if len(values) > len(names):
            raise QuoteParseError(f"expected at most {len(names)} fields, got {len(values)}", lineno)
        rec = dict(zip(names, values))
        instruments.append(_instrument_from_record(rec, lineno))
    if not instruments:
        raise QuoteParseError("quote file contains no instruments", header_line)
    labels = [i.label for i in instruments]
    if len(set(labels)) != len(labels):
        raise QuoteParseError("duplicate instrument labels")

    valuation = spot_lag = None
    if "valuation_date" in directives:
        value, lineno = directives["valuation_date"]
        valuation = _parse_date(value, lineno, "valuation_date")
    if "spot_lag" in directives:
        value, lineno = directives["spot_lag"]
        spot_lag = _parse_int(value, lineno, "spot_lag")
    return QuoteFile(tuple(instruments), valuation, spot_lag, path)
