"""Primal active-set solver for convex quadratic programs.

Solves ``min 0.5 x^T H x + g^T x`` subject to ``E x = e`` and ``G x >= h``
with ``H`` positive definite.  Each iteration solves the equality-constrained
subproblem on the current working set through a sparse KKT factorization,
so banded problems with thousands of variables stay cheap.  Shared by the
bid-ask price optimizer and the shape-constrained discrete curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InfeasibleError, OptimizationError

__all__ = ["QPSolution", "solve_qp", "farkas_certificate"]


@dataclass(frozen=True)
class QPSolution:
    """Solution of a convex QP.

    ``active`` flags the inequality rows in the final working set,
    ``multipliers`` their (nonnegative) Lagrange multipliers.
    ``kkt_residual`` is the largest of the scaled stationarity, primal
    feasibility and complementarity violations.
    """

    x: np.ndarray
    objective: float
    active: np.ndarray
    multipliers: np.ndarray
    eq_multipliers: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool


def _sparse(M, shape):
    if M is None:
        return sp.csr_matrix(shape)
    return sp.csr_matrix(M)


def farkas_certificate(E, e, G, h):
    """Direction ``(y, mu >= 0)`` with ``E^T y + G^T mu = 0`` and ``e.y + h.mu > 0``.

    Such a pair proves ``{E x = e, G x >= h}`` empty.  Returns ``None`` when
    no certificate exists, i.e. the set is nonempty.
    """
    E = sp.csr_matrix(E)
    G = sp.csr_matrix(G)
    m_e, m_g = E.shape[0], G.shape[0]
    A_eq = sp.hstack([E.T, G.T]).tocsr()
    c = -np.concatenate([e, h])
    bounds = [(-1.0, 1.0)] * m_e + [(0.0, 1.0)] * m_g
    res = scipy.optimize.linprog(c, A_eq=A_eq, b_eq=np.zeros(A_eq.shape[0]), bounds=bounds, method="highs")
    if res.status != 0 or -res.fun <= 1e-9 * max(1.0, np.abs(c).max(initial=0.0)):
        return None
    return res.x[:m_e], res.x[m_e:]


def _phase_one(E, e, G, h, n):
    res = scipy.optimize.linprog(
        np.zeros(n),
        A_ub=-G if G.shape[0] else None,
        b_ub=-h if G.shape[0] else None,
        A_eq=E if E.shape[0] else None,
        b_eq=e if E.shape[0] else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleError("constraint set is empty", certificate=farkas_certificate(E, e, G, h))
    if res.status != 0:
        raise OptimizationError(f"phase-one linear program failed: {res.message}")
    return res.x


def solve_qp(H, g=None, E=None, e=None, G=None, h=None, x0=None, tol=1e-10, max_iter=None) -> QPSolution:
    """Minimise ``0.5 x^T H x + g^T x`` s.t. ``E x = e``, ``G x >= h``.

    ``H``, ``E`` and ``G`` may be dense or sparse.  ``x0``, if feasible, is
    the starting point; otherwise a feasible point is found by linear
    programming.

    Raises
    ------
    InfeasibleError
        With a Farkas certificate when the constraints cannot be met.
    OptimizationError
        When the iteration limit is hit or a working-set KKT matrix is singular.
    """
    H = sp.csc_matrix(H)
    n = H.shape[0]
    g = np.zeros(n) if g is None else np.asarray(g, dtype=float)
    E = _sparse(E, (0, n))
    G = _sparse(G, (0, n))
    e = np.zeros(0) if e is None else np.asarray(e, dtype=float)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=float)
    m_e, m_g = E.shape[0], G.shape[0]
    if E.shape[1] != n or G.shape[1] != n or e.size != m_e or h.size != m_g:
        raise ValueError("constraint dimensions do not match")
    max_iter = max_iter or 10 * (n + m_g) + 50
    e_scale = max(1.0, np.abs(e).max(initial=0.0))
    h_scale = max(1.0, np.abs(h).max(initial=0.0))

    def feasible(x):
        ok_eq = m_e == 0 or np.abs(E @ x - e).max() <= 1e-9 * e_scale
        ok_in = m_g == 0 or (G @ x - h).min() >= -1e-9 * h_scale
        return ok_eq and ok_in

    x = None if x0 is None else np.array(x0, dtype=float)
    if x is None or not feasible(x):
        x = _phase_one(E, e, G, h, n)

    working = []
    in_working = np.zeros(m_g, dtype=bool)
    lam = np.zeros(0)
    nu = np.zeros(m_e)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        W = sp.vstack([E, G[working]]).tocsc() if working else E.tocsc()
        m = W.shape[0]
        K = sp.bmat([[H, W.T], [W, None]], format="csc")
        grad = H @ x + g
        rhs_c = np.concatenate([e - E @ x, h[working] - G[working] @ x]) if m else np.zeros(0)
        rhs = np.concatenate([-grad, rhs_c])
        try:
            sol = spla.splu(K).solve(rhs)
        except RuntimeError as exc:
            raise OptimizationError("working-set KKT matrix is singular") from exc
        if not np.all(np.isfinite(sol)):
            raise OptimizationError("working-set KKT solve produced non-finite values")
        step = sol[:n]
        mult = -sol[n:]
        nu, lam = mult[:m_e], mult[m_e:]

        alpha = 1.0
        blocking = None
        tiny = np.abs(step).max(initial=0.0) <= tol * max(1.0, np.abs(x).max())
        if m_g and not tiny:
            Gs = G @ step
            slack = G @ x - h
            candidates = np.nonzero(~in_working & (Gs < -1e-14 * max(1.0, np.abs(step).max())))[0]
            if candidates.size:
                ratios = np.maximum(slack[candidates], 0.0) / -Gs[candidates]
                k = int(np.argmin(ratios))
                if ratios[k] < 1.0:
                    alpha = float(ratios[k])
                    blocking = int(candidates[k])
        x = x + alpha * step
        if blocking is not None:
            working.append(blocking)
            in_working[blocking] = True
            continue

        # Full step: x minimises over the working set and the multipliers just computed apply.
        grad_scale = max(1.0, np.abs(grad).max())
        if lam.size == 0 or lam.min() >= -tol * grad_scale:
            converged = True
            break
        drop = int(np.argmin(lam))
        in_working[working[drop]] = False
        del working[drop]

    if not converged:
        raise OptimizationError(f"active-set method did not converge in {max_iter} iterations")

    multipliers = np.zeros(m_g)
    multipliers[working] = np.maximum(lam, 0.0)
    grad = H @ x + g
    stat = grad - E.T @ nu - G.T @ multipliers
    kkt = np.abs(stat).max(initial=0.0) / max(1.0, np.abs(grad).max(initial=0.0), np.abs(H @ x).max(initial=0.0))
    if m_e:
        kkt = max(kkt, np.abs(E @ x - e).max() / e_scale)
    if m_g:
        slack = G @ x - h
        kkt = max(kkt, max(0.0, -slack.min()) / h_scale)
        kkt = max(kkt, np.abs(multipliers * slack).max() / (h_scale * max(1.0, np.abs(grad).max())))
    objective = float(0.5 * x @ (H @ x) + g @ x)
    return QPSolution(x, objective, in_working.copy(), multipliers, nu, float(kkt), iteration, converged)
