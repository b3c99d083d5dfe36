"""Curve sensitivities to quotes, bucket hedges and key-rate hedges.

All formulas work on the (possibly bordered) system stored on the curve, so
a curve with a pinned short rate is handled by the same code.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .curve_solver import DiscountCurve, KernelExpansion
from .errors import CurveError
from .instruments import Conventions, ParSwap, PricingSystem, add_months, adjust_following

__all__ = [
    "PortfolioCashflows",
    "KeyRateGrid",
    "HedgeReport",
    "dprice_direction",
    "dcashflow_direction",
    "bucket_hedge",
    "triangle_integrals",
    "keyrate_sensitivities",
    "keyrate_hedge",
    "write_sensitivity_profile",
    "par_swap_portfolio",
]


@dataclass(frozen=True)
class PortfolioCashflows:
    """Fixed cashflows ``amounts[k]`` paid at year fractions ``times[k]``."""

    times: np.ndarray
    amounts: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        c = np.atleast_1d(np.asarray(self.amounts, dtype=float))
        if t.shape != c.shape or t.ndim != 1:
            raise ValueError("times and amounts must be 1-d and of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(c))):
            raise ValueError("cashflows must be finite")
        if np.any(t < 0):
            raise ValueError("cashflow times must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "amounts", c)

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_row(cls, system: PricingSystem, row, scale=1.0):
        """Cashflows of one benchmark row of ``system`` (by index or label)."""
        i = system.row(row) if isinstance(row, str) else int(row)
        nz = np.nonzero(system.cashflows[i])[0]
        return cls(system.dates[nz], scale * system.cashflows[i, nz])

    def __add__(self, other):
        return PortfolioCashflows(
            np.concatenate([self.times, other.times]), np.concatenate([self.amounts, other.amounts])
        )

    def scaled(self, factor):
        return PortfolioCashflows(self.times, factor * self.amounts)

    def value(self, curve):
        if self.times.size == 0:
            return 0.0
        return float(self.amounts @ curve(self.times))


@dataclass(frozen=True)
class KeyRateGrid:
    """Key-rate horizons ``0 <= xi_1 < ... < xi_J``."""

    horizons: np.ndarray

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.horizons, dtype=float))
        if h.ndim != 1 or h.size < 1:
            raise ValueError("a key-rate grid needs at least one horizon")
        if not np.all(np.isfinite(h)) or h[0] < 0 or np.any(np.diff(h) <= 0):
            raise ValueError("key-rate horizons must be finite, nonnegative and strictly increasing")
        object.__setattr__(self, "horizons", h)

    @classmethod
    def spaced(cls, horizon, step=0.25):
        """Horizons ``0, step, 2 step, ...`` closed at ``horizon``."""
        if step <= 0 or horizon <= 0:
            raise ValueError("step and horizon must be positive")
        h = np.arange(0.0, horizon, step)
        if horizon - h[-1] > 1e-9:
            h = np.append(h, horizon)
        return cls(h)

    @property
    def J(self):
        return self.horizons.size


@dataclass(frozen=True)
class HedgeReport:
    """Units of each hedge instrument to buy and the remaining sensitivity."""

    labels: tuple[str, ...]
    quantities: np.ndarray
    residual: float
    unhedged: float = float("nan")

    def __post_init__(self):
        if not np.all(np.isfinite(self.quantities)):
            raise CurveError("hedge quantities are not finite")

    def as_dict(self):
        return dict(zip(self.labels, self.quantities.tolist()))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["instrument", "quantity"])
            for label, q in zip(self.labels, self.quantities):
                out.writerow([label, f"{q:.17g}"])


def _solution(curve: DiscountCurve):
    if curve.solution is None:
        raise ValueError("curve carries no solved system; build it with solve()")
    return curve.solution


def _expansion(curve, coef):
    N = curve.dates.size
    slope = float(coef[N]) if curve.has_slope else 0.0
    return KernelExpansion(curve.dates, coef[:N], slope)


def dprice_direction(curve: DiscountCurve, v) -> KernelExpansion:
    """Directional derivative of the curve along a change ``v`` of the price vector.

    Returns the function ``c(v) . phi`` with ``c(v) = C^T (C A C^T)^{-1} v``.
    For a pinned curve ``v`` may omit the short-rate entry.
    """
    sol = _solution(curve)
    v = np.asarray(v, dtype=float)
    n = sol.prices.size
    if curve.has_slope and v.shape == (n - 1,):
        v = np.append(v, 0.0)
    if v.shape != (n,):
        raise ValueError(f"direction must have length {n}, got {v.shape}")
    coef = sol.cashflows.T @ scipy.linalg.cho_solve(sol.factor, v)
    return _expansion(curve, coef)


def dcashflow_direction(curve: DiscountCurve, m) -> KernelExpansion:
    """Directional derivative of the curve along a change ``m`` of the cashflow matrix.

    Weights are ``[m^T - C^T Q (C A m^T + m A C^T)] Q p`` with ``Q = (C A C^T)^{-1}``.
    """
    sol = _solution(curve)
    m = np.asarray(m, dtype=float)
    n, N = sol.cashflows.shape
    if curve.has_slope and m.shape == (n - 1, N - 1):
        m = np.pad(m, ((0, 1), (0, 1)))
    if m.shape != (n, N):
        raise ValueError(f"direction must have shape {(n, N)}, got {m.shape}")
    A = sol.gram.entries
    C = sol.cashflows
    w = sol.multipliers
    mAC = m @ A @ C.T
    coef = m.T @ w - C.T @ scipy.linalg.cho_solve(sol.factor, (mAC.T + mAC) @ w)
    return _expansion(curve, coef)


def bucket_hedge(curve: DiscountCurve, system: PricingSystem, portfolio: PortfolioCashflows) -> HedgeReport:
    """Hedge against individual benchmark price moves.

    ``q_i`` is the first-order change of the portfolio value per unit change
    of price ``p_i``; the hedge buys ``-q_i`` units of benchmark ``i``.  Only
    price-quoted benchmarks are supported.
    """
    rate_rows = [lab for lab, kind in zip(system.labels, system.quote_enters) if kind == "rate"]
    if rate_rows:
        raise CurveError(
            f"bucket hedging needs price-quoted benchmarks; {rate_rows[0]!r} is quoted through its cashflows"
        )
    sol = _solution(curve)
    if portfolio.times.size:
        basis = curve.basis(portfolio.times)
        q = scipy.linalg.cho_solve(sol.factor, sol.cashflows @ (basis.T @ portfolio.amounts))
    else:
        q = np.zeros(sol.prices.size)
    q = q[: system.n]
    traded = [i for i, kind in enumerate(system.quote_enters) if kind != "fixed"]
    labels = tuple(system.labels[i] for i in traded)
    return HedgeReport(labels, -q[traded], 0.0)


def triangle_integrals(grid: KeyRateGrid, tau) -> np.ndarray:
    """``integral_0^tau s_j(x) dx`` for every triangular shift ``s_j``, shape ``(len(tau), J)``.

    With one horizon the single shift is the parallel shift ``s = 1``.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    xi = grid.horizons
    J = xi.size
    if J == 1:
        return tau[:, None].copy()
    out = np.zeros((tau.size, J))
    width = np.diff(xi)
    t = tau[:, None]
    # Interval [xi_j, xi_{j+1}] carries the falling half of s_j and the rising half of s_{j+1}.
    u = np.clip(t - xi[None, :-1], 0.0, width[None, :])
    rise = u**2 / (2.0 * width[None, :])
    out[:, 1:] += rise
    out[:, :-1] += u - rise
    return out


def keyrate_sensitivities(curve, portfolio: PortfolioCashflows, grid: KeyRateGrid) -> np.ndarray:
    """Value change per unit triangular forward shift: ``-sum_k c_k g(tau_k) I_j(tau_k)``."""
    if portfolio.times.size == 0:
        return np.zeros(grid.J)
    weights = portfolio.amounts * curve(portfolio.times)
    return -(weights @ triangle_integrals(grid, portfolio.times))


def keyrate_hedge(
    curve,
    portfolio: PortfolioCashflows,
    grid: KeyRateGrid,
    hedges: Mapping[str, PortfolioCashflows] | Sequence[PortfolioCashflows],
) -> HedgeReport:
    """Least-squares hedge of the key-rate sensitivities of ``portfolio``.

    Quantities minimise ``|| s_port + H q ||_2`` where column ``i`` of ``H``
    holds the sensitivities of hedge instrument ``i``.  A rank-deficient
    ``H`` yields the minimum-norm quantities and a ``RuntimeWarning``.
    """
    if isinstance(hedges, Mapping):
        labels, instruments = tuple(hedges), list(hedges.values())
    else:
        instruments = list(hedges)
        labels = tuple(f"hedge {i + 1}" for i in range(len(instruments)))
    if not instruments:
        raise ValueError("hedge set is empty")
    if np.any(portfolio.times > grid.horizons[-1] + 1e-12) and grid.J > 1:
        warnings.warn("portfolio cashflows beyond the last key-rate horizon are not hedged", RuntimeWarning)
    target = keyrate_sensitivities(curve, portfolio, grid)
    H = np.column_stack([keyrate_sensitivities(curve, h, grid) for h in instruments])
    # gelsy's default cutoff (machine epsilon) misses exactly collinear hedges.
    q, _, rank, _ = scipy.linalg.lstsq(H, -target, cond=1e-12, lapack_driver="gelsy")
    if rank < H.shape[1]:
        warnings.warn(
            f"key-rate sensitivity matrix has rank {rank} < {H.shape[1]}; returning the least-norm hedge",
            RuntimeWarning,
        )
    residual = float(np.linalg.norm(target + H @ q))
    return HedgeReport(labels, q, residual, float(np.linalg.norm(target)))


def write_sensitivity_profile(path, curve, rows, grid_points):
    """CSV ``x,dgdp_<label>...`` of price sensitivities sampled on ``grid_points``."""
    system = curve.system
    columns = []
    names = []
    for row in rows:
        i = system.row(row) if isinstance(row, str) else int(row)
        e = np.zeros(system.n)
        e[i] = 1.0
        columns.append(dprice_direction(curve, e)(grid_points))
        names.append(f"dgdp_{system.labels[i]}")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x"] + names)
        for k, x in enumerate(grid_points):
            out.writerow([f"{x:.17g}"] + [f"{col[k]:.17g}" for col in columns])


def par_swap_portfolio(curve, origin, years, conventions=None, payer=True, frequency=1):
    """Spot-starting swap struck at its par rate on ``curve``, as fixed cashflows.

    The floating leg is replaced by its notional exchange, so a payer swap
    holds ``+1`` at time zero, ``-K delta_j`` on the fixed dates and ``-1`` at
    maturity.  Returns ``(portfolio, par_rate)``.
    """
    conv = conventions or Conventions()
    end = adjust_following(add_months(origin, 12 * int(years)))
    flows = ParSwap(f"{years}y", 0.0, end, origin, frequency).cashflows(origin, conv)
    times = np.array([conv.time(origin, cf.date) for cf in flows])
    accruals = np.array([cf.dquote for cf in flows])
    annuity = float(accruals @ curve(times))
    rate = (1.0 - float(curve(times[-1]))) / annuity
    fixed = -rate * accruals
    fixed[-1] -= 1.0
    amounts = np.concatenate([[1.0], fixed])
    sign = 1.0 if payer else -1.0
    return PortfolioCashflows(np.concatenate([[0.0], times]), sign * amounts), rate
