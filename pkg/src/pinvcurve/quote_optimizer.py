"""Pick quotes inside their bid-ask ranges so that the fitted curve is smoothest.

Price-quoted benchmarks (bonds) enter the right-hand side ``p`` and give the
convex problem ``min p^T Q p`` over a box, ``Q = (C A C^T)^{-1}``.  Rate-quoted
benchmarks enter the cashflow matrix ``C``; that problem is not convex and is
handled by projected gradient descent, so only a local optimum is returned.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernel
from .curve_solver import fit
from .errors import CurveError, IllConditionedError, OptimizationError
from .instruments import PricingSystem
from .qp import solve_qp

__all__ = [
    "QuoteRange",
    "QPResult",
    "norm_squared",
    "optimize_prices",
    "norm_gradient_wrt_quotes",
    "optimize_rate_quotes",
    "write_report",
]


@dataclass(frozen=True)
class QuoteRange:
    """Componentwise bounds ``bid <= value <= ask`` over the rows of a system.

    Bounds live in price space for price-quoted rows and in rate space for
    rate-quoted rows.  ``fixed`` marks rows that are not decision variables;
    their bounds coincide.
    """

    bid: np.ndarray
    ask: np.ndarray
    fixed: np.ndarray

    def __post_init__(self):
        bid = np.asarray(self.bid, dtype=float)
        ask = np.asarray(self.ask, dtype=float)
        fixed = np.asarray(self.fixed, dtype=bool)
        if bid.shape != ask.shape or fixed.shape != bid.shape or bid.ndim != 1:
            raise ValueError("bid, ask and fixed mask must be 1-d of equal length")
        if np.any(np.isnan(bid[~fixed])) or np.any(np.isnan(ask[~fixed])):
            raise ValueError("free rows need finite bid and ask")
        if np.any(bid[~fixed] > ask[~fixed]):
            i = int(np.nonzero(bid > ask)[0][0])
            raise ValueError(f"bid exceeds ask in row {i}: {bid[i]} > {ask[i]}")
        fixed = fixed | (bid == ask)
        for name, arr in (("bid", bid), ("ask", ask), ("fixed", fixed)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def mid(self):
        return 0.5 * (self.bid + self.ask)

    @classmethod
    def relative_spread(cls, system: PricingSystem, spread, kind="price"):
        """Ranges ``mid * (1 -/+ spread / 2)`` on every row quoted as ``kind``.

        ``kind="price"`` spreads the prices, ``kind="rate"`` the rate quotes.
        All other rows are fixed at their current value.
        """
        if spread < 0:
            raise ValueError("spread must be nonnegative")
        mid = system.prices if kind == "price" else system.quotes
        free = np.array([k == kind for k in system.quote_enters])
        half = 0.5 * spread * np.abs(np.where(free, mid, 0.0))
        return cls(np.where(free, mid - half, mid), np.where(free, mid + half, mid), ~free)

    @classmethod
    def absolute_spread(cls, system: PricingSystem, half_width, kind="rate"):
        """Ranges ``mid -/+ half_width`` on every row quoted as ``kind``."""
        if half_width < 0:
            raise ValueError("half width must be nonnegative")
        mid = system.prices if kind == "price" else system.quotes
        free = np.array([k == kind for k in system.quote_enters])
        return cls(np.where(free, mid - half_width, mid), np.where(free, mid + half_width, mid), ~free)


@dataclass(frozen=True)
class QPResult:
    """Outcome of a quote optimization.

    ``bound`` is ``-1`` where the bid is active, ``+1`` at the ask and ``0``
    otherwise.  ``kkt_residual`` is the sup-norm of the projected gradient
    ``x - clip(x - grad)`` over the free rows.
    """

    point: np.ndarray
    objective: float
    initial_objective: float
    gradient: np.ndarray
    bound: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool


def norm_squared(system: PricingSystem):
    """``p^T (C A C^T)^{-1} p``."""
    sol = fit(system.dates, system.cashflows, system.prices, labels=system.labels)
    return float(sol.prices @ sol.multipliers)


def _normal_matrix(system):
    A = kernel.gram(system.dates).entries
    C = system.cashflows
    normal = C @ A @ C.T
    return np.triu(normal) + np.triu(normal, 1).T


def _bound_flags(x, rng, scale):
    tol = 1e-12 * scale
    flags = np.zeros(x.size, dtype=int)
    free = ~rng.fixed
    flags[free & (x <= rng.bid + tol)] = -1
    flags[free & (x >= rng.ask - tol)] = 1
    return flags


def _projected_gradient(x, grad, rng):
    free = ~rng.fixed
    if not np.any(free):
        return 0.0
    step = x - np.clip(x - grad, rng.bid, rng.ask)
    return float(np.abs(step[free]).max())


def optimize_prices(system: PricingSystem, rng: QuoteRange, tol=1e-12) -> QPResult:
    """Minimise ``p^T Q p`` subject to ``bid <= p <= ask``.

    Rate-quoted and fixed rows keep their current prices.  The problem is
    strictly convex so the returned prices are the unique minimiser.
    """
    n = system.n
    if rng.bid.size != n:
        raise ValueError(f"quote range has {rng.bid.size} rows, system has {n}")
    rate_free = [system.labels[i] for i in range(n) if not rng.fixed[i] and system.quote_enters[i] != "price"]
    if rate_free:
        raise CurveError(f"{rate_free[0]!r} is not price-quoted; use optimize_rate_quotes")
    normal = _normal_matrix(system)
    try:
        factor = scipy.linalg.cho_factor(normal, lower=True)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError("C A C^T is not positive definite") from exc
    Q = scipy.linalg.cho_solve(factor, np.eye(n))
    Q = 0.5 * (Q + Q.T)
    p0 = np.where(rng.fixed, system.prices, np.clip(system.prices, rng.bid, rng.ask))
    initial = float(system.prices @ Q @ system.prices)
    free = np.nonzero(~rng.fixed)[0]
    fixed = np.nonzero(rng.fixed)[0]
    if free.size == 0:
        grad = 2.0 * Q @ p0
        return QPResult(p0, float(p0 @ Q @ p0), initial, grad, np.zeros(n, dtype=int), 0.0, 0, True)

    # Free block: min x^T Q_ff x + 2 x^T Q_fx p_x over the box.
    H = 2.0 * Q[np.ix_(free, free)]
    g = 2.0 * Q[np.ix_(free, fixed)] @ p0[fixed]
    k = free.size
    G = np.vstack([np.eye(k), -np.eye(k)])
    h = np.concatenate([rng.bid[free], -rng.ask[free]])
    sol = solve_qp(H, g, G=G, h=h, x0=p0[free], tol=tol)
    p = p0.copy()
    p[free] = np.clip(sol.x, rng.bid[free], rng.ask[free])
    grad = 2.0 * Q @ p
    scale = max(1.0, np.abs(p).max())
    return QPResult(
        p,
        float(p @ Q @ p),
        initial,
        grad,
        _bound_flags(p, rng, scale),
        _projected_gradient(p, grad, rng),
        sol.iterations,
        sol.converged,
    )


def norm_gradient_wrt_quotes(system: PricingSystem, dC=None) -> np.ndarray:
    """Derivative of ``p^T (C A C^T)^{-1} p`` with respect to every quote.

    ``dC`` is a sequence of ``(n, N)`` matrices, one per quote.  When omitted
    the per-row derivatives stored on ``system`` are used, so quote ``i``
    moves row ``i`` only.  Component ``i`` equals
    ``-2 p^T Q (dC_i) A C^T Q p``.
    """
    sol = fit(system.dates, system.cashflows, system.prices, labels=system.labels)
    w = sol.multipliers
    ACw = sol.gram.entries @ (sol.cashflows.T @ w)
    if dC is None:
        return -2.0 * w * (system.quote_sensitivity @ ACw)
    dC = [np.asarray(m, dtype=float) for m in dC]
    for m in dC:
        if m.shape != system.cashflows.shape:
            raise ValueError(f"quote derivative has shape {m.shape}, expected {system.cashflows.shape}")
    return np.array([-2.0 * w @ (m @ ACw) for m in dC])


def _objective(system, quotes):
    try:
        value = norm_squared(system.with_quotes(quotes))
    except (IllConditionedError, np.linalg.LinAlgError):
        return np.inf
    return value if np.isfinite(value) else np.inf


def optimize_rate_quotes(
    system: PricingSystem,
    rng: QuoteRange,
    max_iter=500,
    tol=1e-8,
    armijo=1e-4,
    max_halvings=60,
) -> QPResult:
    """Projected gradient descent on the rate quotes with Armijo backtracking.

    Steps that yield a non-finite objective are treated as failed trials and
    halved.  The objective never increases across accepted steps; only local
    optimality is claimed.

    Raises
    ------
    OptimizationError
        If no trial step along the first search direction has a finite objective.
    """
    n = system.n
    if rng.bid.size != n:
        raise ValueError(f"quote range has {rng.bid.size} rows, system has {n}")
    price_free = [system.labels[i] for i in range(n) if not rng.fixed[i] and system.quote_enters[i] != "rate"]
    if price_free:
        raise CurveError(f"{price_free[0]!r} is not rate-quoted; use optimize_prices")
    free = ~rng.fixed
    alpha = np.where(free, np.clip(np.nan_to_num(system.quotes), rng.bid, rng.ask), system.quotes)
    initial = _objective(system, system.quotes)
    value = _objective(system, alpha)
    if not np.isfinite(value):
        raise OptimizationError("objective is not finite at the starting quotes")
    grad = np.where(free, norm_gradient_wrt_quotes(system.with_quotes(alpha)), 0.0)
    pg = _projected_gradient(alpha, grad, rng)
    width = np.where(free, rng.ask - rng.bid, 0.0)
    step = float(width.max() / np.abs(grad).max()) if pg > 0 else 0.0
    iterations = 0
    while pg > tol and iterations < max_iter:
        accepted = False
        saw_finite = False
        for _ in range(max_halvings):
            trial = np.where(free, np.clip(alpha - step * grad, rng.bid, rng.ask), alpha)
            trial_value = _objective(system, trial)
            if np.isfinite(trial_value):
                saw_finite = True
                if trial_value <= value + armijo * grad[free] @ (trial - alpha)[free]:
                    accepted = True
                    break
            step *= 0.5
        if not saw_finite:
            raise OptimizationError("objective stayed non-finite along the search direction")
        if not accepted:
            break
        moved = np.abs(trial - alpha)[free].max()
        alpha, value = trial, trial_value
        iterations += 1
        grad = np.where(free, norm_gradient_wrt_quotes(system.with_quotes(alpha)), 0.0)
        pg = _projected_gradient(alpha, grad, rng)
        step *= 2.0
        if moved == 0.0:
            break
    scale = max(1e-300, np.abs(np.where(free, alpha, 0.0)).max())
    return QPResult(
        alpha,
        float(value),
        float(initial),
        grad,
        _bound_flags(alpha, rng, scale),
        pg,
        iterations,
        bool(pg <= tol),
    )


def write_report(path, system: PricingSystem, rng: QuoteRange, result: QPResult, space="price"):
    """CSV of per-instrument bid, mid, ask and optimal values with the norms before and after."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# norm_squared_mid: {result.initial_objective:.17g}\n")
        fh.write(f"# norm_squared_optimal: {result.objective:.17g}\n")
        fh.write(f"# kkt_residual: {result.kkt_residual:.17g}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["instrument", "space", "bid", "mid", "ask", "optimal", "bound"])
        for i, label in enumerate(system.labels):
            if rng.fixed[i]:
                continue
            out.writerow(
                [label, space]
                + [f"{v:.17g}" for v in (rng.bid[i], rng.mid[i], rng.ask[i], result.point[i])]
                + [{-1: "bid", 0: "", 1: "ask"}[int(result.bound[i])]]
            )
