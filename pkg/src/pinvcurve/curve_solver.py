"""Closed-form minimal-norm curve through linear pricing constraints.

The smoothest curve satisfying ``C g(x) = p`` is the kernel expansion
``g*(x) = z . phi(x)`` with ``z = C^T (C A C^T)^{-1} p`` and ``A`` the Gram
matrix of the cashflow dates.  Pinning the short rate adds the ``psi``
representer and a row ``g'(0) = -r``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import kernel
from .errors import DomainError, IllConditionedError
from .instruments import PricingSystem

__all__ = ["KernelExpansion", "DiscountCurve", "fit", "solve", "solve_fixed_short_rate", "read_weights"]


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise ValueError("evaluation points must be finite and nonnegative")
    return x


@dataclass(frozen=True)
class KernelExpansion:
    """Function ``sum_j weights[j] * phi(dates[j], x) + slope_weight * x``.

    Piecewise cubic with knots at ``dates`` and linear beyond the last knot.
    """

    dates: np.ndarray
    weights: np.ndarray
    slope_weight: float = 0.0

    def __post_init__(self):
        for name in ("dates", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.dates.shape != self.weights.shape:
            raise ValueError("dates and weights must have the same length")

    def _eval(self, fn, x, slope_term):
        x = _as_points(x)
        flat = np.atleast_1d(x)
        values = fn(self.dates[None, :], flat[:, None]) @ self.weights + slope_term(flat)
        return float(values[0]) if x.ndim == 0 else values.reshape(x.shape)

    def __call__(self, x):
        return self._eval(kernel.phi, x, lambda t: self.slope_weight * t)

    def derivative(self, x):
        return self._eval(kernel.phi_prime, x, lambda t: np.full_like(t, self.slope_weight))

    def second_derivative(self, x):
        return self._eval(kernel.phi_second, x, np.zeros_like)

    def basis(self, x):
        """Rows ``phi(x_k)`` (and ``psi(x_k)`` if the expansion carries a slope term)."""
        x = np.atleast_1d(_as_points(x))
        rows = kernel.phi(self.dates[None, :], x[:, None])
        if self.has_slope:
            rows = np.column_stack([rows, x])
        return rows

    @property
    def has_slope(self):
        return self.slope_weight != 0.0

    @property
    def knots(self):
        return self.dates

    def write_weights(self, path):
        """Write ``date,z`` with 17 significant digits; the slope weight goes on a ``psi`` row."""
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["date", "z"])
            for x, z in zip(self.dates, self.weights):
                out.writerow([f"{x:.17g}", f"{z:.17g}"])
            if self.slope_weight != 0.0 or self.has_slope:
                out.writerow(["psi", f"{self.slope_weight:.17g}"])


def read_weights(path) -> KernelExpansion:
    """Inverse of :meth:`KernelExpansion.write_weights`."""
    dates, weights, slope = [], [], 0.0
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            if rec["date"] == "psi":
                slope = float(rec["z"])
            else:
                dates.append(float(rec["date"]))
                weights.append(float(rec["z"]))
    return KernelExpansion(np.array(dates), np.array(weights), slope)


@dataclass(frozen=True)
class _Fit:
    gram: kernel.KernelMatrix
    cashflows: np.ndarray
    prices: np.ndarray
    factor: tuple
    multipliers: np.ndarray
    weights: np.ndarray


def _worst_pair(normal, labels):
    d = np.sqrt(np.abs(np.diag(normal)))
    d[d == 0] = 1.0
    corr = np.abs(normal / np.outer(d, d))
    np.fill_diagonal(corr, 0.0)
    i, j = np.unravel_index(np.argmax(corr), corr.shape)
    return labels[i], labels[j]


def fit(dates, C, p, short_rate=None, labels=None):
    """Solve the minimal-norm problem for raw ``(dates, C, p)``.

    Returns the low-level solution record.  With ``short_rate`` the system
    is bordered as ``blkdiag(C, 1)``, ``(p, -r)`` over the augmented Gram.
    """
    C = np.asarray(C, dtype=float)
    p = np.asarray(p, dtype=float)
    if short_rate is None:
        A = kernel.gram(dates)
    else:
        A = kernel.gram_augmented(dates)
        n, N = C.shape
        C = np.block([[C, np.zeros((n, 1))], [np.zeros((1, N)), np.ones((1, 1))]])
        p = np.append(p, -float(short_rate))
        if labels is not None:
            labels = tuple(labels) + ("short rate",)
    if C.shape[1] != A.entries.shape[0] or C.shape[0] != p.size:
        raise ValueError("cashflow matrix does not match dates and prices")
    AC = A.entries @ C.T
    normal = C @ AC
    normal = np.triu(normal) + np.triu(normal, 1).T
    try:
        factor = scipy.linalg.cho_factor(normal, lower=True)
    except np.linalg.LinAlgError as exc:
        labels = labels or tuple(str(i) for i in range(C.shape[0]))
        a, b = _worst_pair(normal, labels)
        raise IllConditionedError(
            f"C A C^T is not positive definite; most collinear instruments: {a!r} and {b!r}"
        ) from exc
    w = scipy.linalg.cho_solve(factor, p)
    z = C.T @ w
    return _Fit(A, C, p, factor, w, z)


@dataclass(frozen=True)
class DiscountCurve(KernelExpansion):
    """Minimal-norm discount curve with the factorization of ``C A C^T`` kept for reuse.

    When the short rate is pinned, ``cashflows``, ``prices`` and ``gram`` are the
    bordered versions and the last weight multiplies ``psi``.
    """

    short_rate: float | None = None
    system: PricingSystem | None = field(default=None, repr=False, compare=False)
    solution: _Fit | None = field(default=None, repr=False, compare=False)

    @property
    def has_slope(self):
        return self.short_rate is not None

    @property
    def all_weights(self):
        """Weights over the full basis, including the ``psi`` weight when pinned."""
        if self.has_slope:
            return np.append(self.weights, self.slope_weight)
        return np.array(self.weights)

    def discount(self, x):
        return self(x)

    def zero_yield(self, x):
        """Continuously compounded yield ``-ln g(x) / x``; the instantaneous forward at 0."""
        x = _as_points(x)
        flat = np.atleast_1d(x)
        g = np.atleast_1d(self(flat))
        if np.any(g <= 0):
            raise DomainError(f"discount factor is not positive at x={flat[np.argmax(g <= 0)]:g}")
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(flat > 0, -np.log(g) / np.where(flat > 0, flat, 1.0), 0.0)
        at_zero = flat == 0
        if np.any(at_zero):
            y[at_zero] = self.forward(0.0)
        return float(y[0]) if x.ndim == 0 else y.reshape(x.shape)

    def forward(self, x):
        """Instantaneous forward ``-g'(x) / g(x)``."""
        x = _as_points(x)
        g = np.atleast_1d(self(x))
        if np.any(g <= 0):
            raise DomainError("discount factor is not positive; forward rate undefined")
        f = -np.atleast_1d(self.derivative(x)) / g
        return float(f[0]) if x.ndim == 0 else f.reshape(x.shape)

    def norm_squared(self):
        """``p^T (C A C^T)^{-1} p``, the squared norm of the curve."""
        return float(self.solution.prices @ self.solution.multipliers)

    def knot_values(self):
        return self(self.dates)

    def repricing_residuals(self):
        """``C g(x) - p`` for the original (unbordered) system."""
        return self.system.residuals(self.knot_values())

    def nonpositive_region(self, upto=None, step=1.0 / 365.0):
        """First sampled point where the curve is not positive, or ``None``."""
        upto = self.dates[-1] if upto is None else upto
        grid = np.arange(0.0, upto + step, step)
        bad = np.nonzero(self(grid) <= 0)[0]
        return float(grid[bad[0]]) if bad.size else None

    def export(self, path, grid):
        """Write ``x,discount,zero_yield,forward``; undefined rates are written as nan."""
        grid = np.asarray(grid, dtype=float)
        g = self(grid)
        dg = self.derivative(grid)
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = g > 0
            y = np.where(pos & (grid > 0), -np.log(np.where(pos, g, 1.0)) / np.where(grid > 0, grid, 1.0), np.nan)
            f = np.where(pos, -dg / np.where(pos, g, 1.0), np.nan)
        if pos[0] and grid[0] == 0:
            y[0] = f[0]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["x", "discount", "zero_yield", "forward"])
            for row in zip(grid, g, y, f):
                out.writerow([f"{v:.17g}" for v in row])


def _curve(system, sol, short_rate):
    N = system.N
    z = sol.weights
    slope = float(z[N]) if short_rate is not None else 0.0
    return DiscountCurve(system.dates, z[:N], slope, short_rate, system, sol)


def solve(system: PricingSystem) -> DiscountCurve:
    """Smoothest discount curve repricing every instrument of ``system``.

    Raises
    ------
    IllConditionedError
        When ``C A C^T`` fails its Cholesky factorization.
    """
    sol = fit(system.dates, system.cashflows, system.prices, labels=system.labels)
    return _curve(system, sol, None)


def solve_fixed_short_rate(system: PricingSystem, r: float) -> DiscountCurve:
    """As :func:`solve`, with the extra constraint ``g'(0) = -r`` so that ``f(0) = r``."""
    if not np.isfinite(r):
        raise ValueError("short rate must be finite")
    sol = fit(system.dates, system.cashflows, system.prices, short_rate=r, labels=system.labels)
    return _curve(system, sol, float(r))


def sample_grid(start, end, step):
    """Closed grid ``start, start + step, ...`` that reaches ``end``."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    count = int(np.floor((end - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def export_path(directory, name):
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path / name
