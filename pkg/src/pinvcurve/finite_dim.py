"""Discrete counterpart of the minimal-norm curve on a uniform grid.

Discount factors ``d_k = g(u_k)`` on ``u_k = k * delta`` are penalised by
``||A d||^2`` where ``A`` is a lower-triangular banded difference operator:
a level row, a first-difference row and scaled second differences.  The
smoothest ``d`` with ``C d = p`` has the closed form
``d = A^{-1} M^T (M M^T)^{-1} p`` with ``M = C A^{-1}``; adding monotonicity
or positivity turns it into a sparse convex QP.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import RankDeficientError
from .qp import solve_qp

__all__ = [
    "DiscreteGrid",
    "SmoothnessOperator",
    "build_operator",
    "solve_discrete",
    "solve_discrete_constrained",
    "discrete_norm_squared",
    "write_discrete_curve",
]


@dataclass(frozen=True)
class DiscreteGrid:
    """Uniform grid ``u_k = k * delta``, ``k = 0..K-1``.

    ``allocation`` maps values on the grid to values at arbitrary
    nonnegative dates by linear interpolation between neighbouring nodes;
    dates that sit on a node get weight one on that node.
    """

    K: int
    delta: float

    def __post_init__(self):
        if self.K < 3:
            raise ValueError("a discrete grid needs at least 3 nodes")
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise ValueError("grid step must be positive and finite")

    @classmethod
    def covering(cls, horizon, delta):
        """Smallest grid from 0 that reaches ``horizon``."""
        K = max(3, int(np.ceil(horizon / delta - 1e-9)) + 1)
        return cls(K, float(delta))

    @property
    def nodes(self):
        return self.delta * np.arange(self.K)

    def allocation(self, dates) -> sp.csr_matrix:
        """Sparse ``(len(dates), K)`` interpolation matrix."""
        dates = np.asarray(dates, dtype=float)
        pos = dates / self.delta
        if np.any(dates < 0) or np.any(pos > self.K - 1 + 1e-9):
            raise ValueError("dates fall outside the grid")
        snapped = np.round(pos)
        on_node = np.abs(pos - snapped) <= 1e-9 * np.maximum(1.0, pos)
        pos = np.where(on_node, snapped, pos)
        left = np.minimum(np.floor(pos).astype(int), self.K - 2)
        w = pos - left
        rows = np.repeat(np.arange(dates.size), 2)
        cols = np.column_stack([left, left + 1]).ravel()
        vals = np.column_stack([1.0 - w, w]).ravel()
        P = sp.csr_matrix((vals, (rows, cols)), shape=(dates.size, self.K))
        P.eliminate_zeros()
        return P

    def on_grid(self, dates):
        pos = np.asarray(dates, dtype=float) / self.delta
        return np.abs(pos - np.round(pos)) <= 1e-9 * np.maximum(1.0, pos)


@dataclass(frozen=True)
class SmoothnessOperator:
    """Lower-triangular banded operator ``A`` of bandwidth three.

    ``bands`` holds the diagonal and the two subdiagonals in the layout of
    :func:`scipy.linalg.solve_banded` with ``(l, u) = (2, 0)``.
    """

    K: int
    delta: float
    bands: np.ndarray
    slope_scale: str = "verbatim"

    def dense(self):
        return self.sparse().toarray()

    def sparse(self):
        K = self.K
        return sp.diags([self.bands[0], self.bands[1, : K - 1], self.bands[2, : K - 2]], [0, -1, -2], format="csr")

    def apply(self, d):
        return self.sparse() @ np.asarray(d, dtype=float)

    def solve(self, y):
        """``A^{-1} y``."""
        return scipy.linalg.solve_banded((2, 0), self.bands, y)

    def solve_transpose(self, y):
        """``A^{-T} y``."""
        upper = np.zeros_like(self.bands)
        upper[0, 2:] = self.bands[2, : self.K - 2]
        upper[1, 1:] = self.bands[1, : self.K - 1]
        upper[2] = self.bands[0]
        return scipy.linalg.solve_banded((0, 2), upper, y)


def build_operator(K, delta, slope_scale="verbatim") -> SmoothnessOperator:
    """Operator with ``||A d||^2 = d_0^2 + w (d_1 - d_0)^2 + sum_k (D2 d_k / delta^2)^2 delta``.

    ``slope_scale="verbatim"`` uses ``w = 1 / delta`` for the first-difference
    row.  ``"consistent"`` uses ``w = 1 / delta^2`` so that the row
    approximates ``g'(0)^2`` and the discrete norm converges to the
    continuous one as ``delta`` shrinks.
    """
    if K < 3:
        raise ValueError("K must be at least 3")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if slope_scale not in ("verbatim", "consistent"):
        raise ValueError("slope_scale must be 'verbatim' or 'consistent'")
    s1 = delta**-0.5 if slope_scale == "verbatim" else 1.0 / delta
    s2 = delta**-1.5
    diag = np.full(K, s2)
    diag[0], diag[1] = 1.0, s1
    sub1 = np.full(K, -2.0 * s2)
    sub1[0] = -s1
    sub1[-1] = 0.0
    sub2 = np.full(K, s2)
    sub2[-2:] = 0.0
    # Column-major band storage for solve_banded: bands[1 + i - j, j] = A[i, j] with i - j in {0, 1, 2}.
    bands = np.zeros((3, K))
    bands[0] = diag
    bands[1, : K - 1] = sub1[: K - 1]
    bands[2, : K - 2] = sub2[: K - 2]
    return SmoothnessOperator(K, float(delta), bands, slope_scale)


def discrete_norm_squared(op: SmoothnessOperator, d):
    """``||A d||^2``."""
    r = op.apply(d)
    return float(r @ r)


def _grid_matrix(C, dates, grid):
    """Cashflow matrix on the grid columns."""
    C = np.asarray(C, dtype=float)
    if dates is None:
        if C.shape[1] != grid.K:
            raise ValueError(f"C has {C.shape[1]} columns, grid has {grid.K} nodes")
        return C
    return np.asarray((sp.csr_matrix(C) @ grid.allocation(dates)).toarray())


def solve_discrete(C, p, op: SmoothnessOperator, dates=None):
    """Closed-form smoothest ``d`` with ``C d = p``.

    ``C`` is either ``(n, K)`` over the grid or ``(n, N)`` over ``dates``,
    which are then interpolated onto the grid linearly.

    Raises
    ------
    RankDeficientError
        If ``C`` does not have full row rank on the grid.
    """
    grid = DiscreteGrid(op.K, op.delta)
    Cg = _grid_matrix(C, dates, grid)
    p = np.asarray(p, dtype=float)
    # Y = M^T = A^{-T} C^T; a thin QR of Y gives M^+ without forming M M^T.
    Y = op.solve_transpose(Cg.T)
    Qy, R = scipy.linalg.qr(Y, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() <= 1e-12 * diag.max():
        raise RankDeficientError(f"cashflow matrix is rank deficient on the grid (row {int(np.argmin(diag))})")
    def pinv(rhs):
        return op.solve(Qy @ scipy.linalg.solve_triangular(R, rhs, trans="T"))

    d = pinv(p)
    # One refinement step recovers the digits lost to the delta^{-3/2} scaling on fine grids.
    return d + pinv(p - Cg @ d)


def solve_discrete_constrained(
    C,
    p,
    op: SmoothnessOperator,
    dates=None,
    monotone=False,
    positive=False,
    margin=0.0,
    tol=1e-12,
):
    """Smoothest ``d`` with ``C d = p`` and optional shape constraints.

    ``monotone`` imposes ``d_k - d_{k+1} >= margin``; ``positive`` imposes
    ``d_k >= margin`` (only the last node when combined with ``monotone``).
    Returns ``(d, qp_solution)``.

    Raises
    ------
    InfeasibleError
        With a Farkas certificate when the constraints admit no ``d``.
    """
    grid = DiscreteGrid(op.K, op.delta)
    Cg = _grid_matrix(C, dates, grid)
    K = op.K
    d0 = solve_discrete(Cg, p, op)
    rows = []
    if monotone:
        rows.append(sp.diags([np.ones(K - 1), -np.ones(K - 1)], [0, 1], shape=(K - 1, K)))
    if positive:
        if monotone:
            last = sp.csr_matrix(([1.0], ([0], [K - 1])), shape=(1, K))
            rows.append(last)
        else:
            rows.append(sp.identity(K, format="csr"))
    G = sp.vstack(rows).tocsr() if rows else sp.csr_matrix((0, K))
    h = np.full(G.shape[0], float(margin))
    A = op.sparse()
    H = (A.T @ A).tocsc()
    sol = solve_qp(H, None, E=sp.csr_matrix(Cg), e=np.asarray(p, dtype=float), G=G, h=h, x0=d0, tol=tol)
    if not np.any(sol.active):
        # No constraint binds: the closed form is the exact optimum.
        return d0, sol
    return sol.x, sol


def write_discrete_curve(path, op: SmoothnessOperator, d):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["u", "d"])
        for u, v in zip(op.delta * np.arange(op.K), d):
            out.writerow([f"{u:.17g}", f"{v:.17g}"])
