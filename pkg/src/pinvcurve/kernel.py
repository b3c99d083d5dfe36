"""Reproducing kernel of the discount-curve Hilbert space.

The space holds functions on ``[0, horizon]`` with absolutely continuous first
derivative and squared norm ``g(0)**2 + g'(0)**2 + integral of g''(x)**2``.
Point evaluation at ``tau`` is represented by

    phi_tau(x) = 1 - m**3 / 6 + x * tau * (2 + m) / 2,    m = min(x, tau)

and the derivative-at-zero functional by ``psi(x) = x``.  None of these
expressions depend on the horizon, so neither does anything in this module.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import IllConditionedError

__all__ = [
    "phi",
    "phi_prime",
    "phi_second",
    "psi",
    "gram",
    "gram_augmented",
    "KernelMatrix",
    "AugmentedKernelMatrix",
]


def _check_args(tau, x):
    tau = np.asarray(tau, dtype=float)
    x = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(x))):
        raise ValueError("kernel arguments must be finite")
    if np.any(tau < 0) or np.any(x < 0):
        raise ValueError("kernel arguments must be nonnegative")
    return tau, x


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def phi(tau, x):
    """Representer of evaluation at ``tau``, evaluated at ``x``.

    Broadcasts over ``tau`` and ``x``.  Symmetric in its two arguments.
    """
    tau, x = _check_args(tau, x)
    m = np.minimum(x, tau)
    return _scalar_or_array(1.0 - m**3 / 6.0 + 0.5 * x * tau * (2.0 + m))


def phi_prime(tau, x):
    """Derivative of ``phi(tau, .)`` with respect to ``x``."""
    tau, x = _check_args(tau, x)
    m = np.minimum(x, tau)
    return _scalar_or_array(tau - 0.5 * m**2 + tau * m)


def phi_second(tau, x):
    """Second derivative of ``phi(tau, .)``: ``tau - x`` below ``tau``, zero above."""
    tau, x = _check_args(tau, x)
    return _scalar_or_array(np.where(x <= tau, tau - x, 0.0))


def psi(x):
    """Representer of ``g -> g'(0)``."""
    _, x = _check_args(0.0, x)
    return _scalar_or_array(x.copy())


def _check_dates(dates):
    dates = np.asarray(dates, dtype=float)
    if dates.ndim != 1 or dates.size == 0:
        raise ValueError("dates must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(dates)) or np.any(dates < 0):
        raise ValueError("dates must be finite and nonnegative")
    if np.any(np.diff(dates) <= 0):
        raise ValueError("dates must be strictly increasing (no duplicates)")
    return dates


def _symmetric(entries):
    upper = np.triu(entries)
    return upper + np.triu(upper, 1).T


def _factor(matrix, jitter, what):
    if jitter is not None:
        if jitter == "auto":
            jitter = 1e-12 * np.trace(matrix) / matrix.shape[0]
        warnings.warn(
            f"adding diagonal jitter {jitter:.3e} to the {what}; "
            "instruments will no longer be repriced exactly",
            RuntimeWarning,
            stacklevel=3,
        )
        matrix = matrix + jitter * np.eye(matrix.shape[0])
    try:
        factor = scipy.linalg.cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"{what} is not numerically positive definite") from exc
    return matrix, factor


class KernelMatrix:
    """Gram matrix ``A[i, j] = phi(x_i, x_j)`` with its Cholesky factor."""

    def __init__(self, dates, entries, factor):
        self.dates = dates
        self.entries = entries
        self.factor = factor
        self.dates.setflags(write=False)
        self.entries.setflags(write=False)

    @property
    def pivots(self):
        """Diagonal of the Cholesky factor."""
        return np.diag(self.factor[0]).copy()

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"{type(self).__name__}(N={self.entries.shape[0]})"


class AugmentedKernelMatrix(KernelMatrix):
    """Gram matrix bordered by the ``psi`` row and column.

    The border holds ``<phi_{x_i}, psi> = x_i`` and the corner ``<psi, psi> = 1``.
    """

    def __init__(self, base, entries, factor):
        super().__init__(base.dates, entries, factor)
        self.base = base


def gram(dates, jitter=None):
    """Assemble the Gram matrix of the representers anchored at ``dates``.

    Parameters
    ----------
    dates : array_like
        Strictly increasing nonnegative year fractions.
    jitter : float, "auto" or None
        Optional diagonal regularization, off by default.  ``"auto"`` uses
        ``1e-12 * trace / N``.  Enabling it emits a ``RuntimeWarning``.

    Raises
    ------
    IllConditionedError
        If the Cholesky factorization fails.
    """
    dates = _check_dates(dates)
    entries = _symmetric(phi(dates[:, None], dates[None, :]))
    entries, factor = _factor(entries, jitter, "kernel Gram matrix")
    return KernelMatrix(dates, entries, factor)


def gram_augmented(dates, jitter=None):
    """Gram matrix of ``(phi_{x_1}, ..., phi_{x_N}, psi)``."""
    base = gram(dates, jitter=jitter)
    n = base.entries.shape[0]
    entries = np.empty((n + 1, n + 1))
    entries[:n, :n] = base.entries
    entries[:n, n] = base.dates
    entries[n, :n] = base.dates
    entries[n, n] = 1.0
    entries, factor = _factor(entries, None, "augmented Gram matrix")
    return AugmentedKernelMatrix(base, entries, factor)
