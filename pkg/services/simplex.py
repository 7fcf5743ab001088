"""
Dense two-phase tableau simplex (Bland's rule) for the weight programs over a
fixed set of support points.

    maximize    c^T theta
    subject to  lower <= F theta <= upper,  sum(theta) = 1,  theta >= 0

Box rows are expanded into <= rows with slacks, sum(theta) = 1 is kept as a
genuine equality row, and every row is scaled by its largest coefficient.
Duals of the solved program are recovered from the final basis.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import FEASIBILITY_TOL, MAX_PIVOTS, PIVOT_TOL
from services.errors import ParameterError
from services.model import BoxRegion

logger = logging.getLogger(__name__)

OPTIMAL = "OPTIMAL"
INFEASIBLE = "INFEASIBLE"
UNBOUNDED_GUARD = "UNBOUNDED_GUARD"


@dataclass(frozen=True)
class ThetaLP:
    objective_coeffs: np.ndarray  # c, length L
    moment_matrix: np.ndarray  # F, k x L
    moment_box: BoxRegion

    def __post_init__(self):
        c = np.asarray(self.objective_coeffs, dtype=float).ravel()
        F = np.asarray(self.moment_matrix, dtype=float)
        if F.ndim == 1:
            F = F.reshape(1, -1)
        if c.size < 1:
            raise ParameterError("a weight program needs at least one support point")
        if F.shape[1] != c.size or F.shape[0] != self.moment_box.dimension:
            raise ParameterError(f"moment matrix shape {F.shape} does not match {c.size} points")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(F))):
            raise ParameterError("weight program data must be finite")
        object.__setattr__(self, "objective_coeffs", c)
        object.__setattr__(self, "moment_matrix", F)


@dataclass(frozen=True)
class LpSolution:
    theta: np.ndarray
    value: float
    status: str
    multipliers: Optional[np.ndarray] = None  # dual of upper row minus dual of lower row
    offset: float = 0.0  # dual of sum(theta) = 1

    @property
    def optimal(self):
        return self.status == OPTIMAL


# --------- Tableau machinery ---------

def _pivot(T, row, col):
    T[row, :] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r, :] -= T[r, col] * T[row, :]


def _enter(z_row):
    # Bland: lowest-index column with a negative reduced cost
    candidates = np.nonzero(z_row[:-1] < -PIVOT_TOL)[0]
    return int(candidates[0]) if candidates.size else -1


def _leave(T, col, basis):
    rhs = np.maximum(T[:-1, -1], 0.0)
    best = None
    for i in range(T.shape[0] - 1):
        a = T[i, col]
        if a > PIVOT_TOL:
            key = (rhs[i] / a, basis[i])
            if best is None or key < best[0]:
                best = (key, i)
    return -1 if best is None else best[1]


def _iterate(T, basis):
    for _ in range(MAX_PIVOTS):
        j = _enter(T[-1, :])
        if j == -1:
            return OPTIMAL
        i = _leave(T, j, basis)
        if i == -1:
            return UNBOUNDED_GUARD
        _pivot(T, i, j)
        basis[i] = j
    logger.error("Simplex hit the pivot limit (%d)", MAX_PIVOTS)
    return UNBOUNDED_GUARD


def _solve_standard(c, A_ub, b_ub, A_eq, b_eq):
    """
    maximize c^T x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, x >= 0.
    Returns (status, x, y_ub, y_eq).
    """
    n = c.size
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([b_ub, b_eq])

    scale = np.max(np.abs(A), axis=1)
    scale[scale == 0.0] = 1.0
    A = A / scale[:, None]
    b = b / scale
    slack = np.zeros((m, m_ub))
    slack[np.arange(m_ub), np.arange(m_ub)] = 1.0
    flip = b < 0.0
    A[flip] *= -1.0
    b[flip] *= -1.0
    slack[flip] *= -1.0

    needs_artificial = [i for i in range(m) if i >= m_ub or flip[i]]
    n_art = len(needs_artificial)
    total = n + m_ub + n_art
    T = np.zeros((m + 1, total + 1))
    T[:m, :n] = A
    T[:m, n:n + m_ub] = slack
    T[:m, -1] = b
    basis = [n + i if i < m_ub else -1 for i in range(m)]
    for a, i in enumerate(needs_artificial):
        T[i, n + m_ub + a] = 1.0
        basis[i] = n + m_ub + a

    # Phase I: max -sum(artificials)
    if n_art:
        T[-1, n + m_ub:total] = 1.0
        for i in needs_artificial:
            T[-1, :] -= T[i, :]
        status = _iterate(T, basis)
        if status != OPTIMAL or -T[-1, -1] > FEASIBILITY_TOL:
            logger.debug("Phase I ended with infeasibility %g", -T[-1, -1])
            return INFEASIBLE, None, None, None

        keep = []
        for r in range(m):
            if basis[r] >= n + m_ub:
                candidates = np.nonzero(np.abs(T[r, :n + m_ub]) > PIVOT_TOL)[0]
                if candidates.size == 0:
                    continue  # redundant row
                _pivot(T, r, int(candidates[0]))
                basis[r] = int(candidates[0])
            keep.append(r)
        T = np.vstack([T[keep, :], T[-1:, :]])
        T = np.hstack([T[:, :n + m_ub], T[:, -1:]])
        basis = [basis[r] for r in keep]

    # Phase II
    cost = np.zeros(n + m_ub)
    cost[:n] = c
    T[-1, :] = 0.0
    T[-1, :n] = -c
    for r, j in enumerate(basis):
        if cost[j] != 0.0:
            T[-1, :] += cost[j] * T[r, :]
    status = _iterate(T, basis)
    if status != OPTIMAL:
        return status, None, None, None

    x = np.zeros(n + m_ub)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    x = np.maximum(x[:n], 0.0)

    # Duals from the original (unscaled) basis: M_B^T y = c_B
    M = np.hstack([np.vstack([A_ub, A_eq]), np.vstack([np.eye(m_ub), np.zeros((m_eq, m_ub))])])
    y, *_ = np.linalg.lstsq(M[:, basis].T, cost[basis], rcond=None)
    return OPTIMAL, x, y[:m_ub], y[m_ub:]


# --------- Public API ---------

def solve_lp(p):
    """Solve a ThetaLP; duals are reported as `multipliers` and `offset`"""
    F = p.moment_matrix
    c = p.objective_coeffs
    k, L = F.shape
    lower = np.asarray(p.moment_box.lower)
    upper = np.asarray(p.moment_box.upper)
    A_ub = np.vstack([F, -F])
    b_ub = np.concatenate([upper, -lower])
    status, theta, y_ub, y_eq = _solve_standard(c, A_ub, b_ub, np.ones((1, L)), np.ones(1))
    if status != OPTIMAL:
        return LpSolution(np.zeros(L), -np.inf, status)
    theta = theta / theta.sum()
    multipliers = y_ub[:k] - y_ub[k:]
    return LpSolution(theta, float(c @ theta), OPTIMAL, multipliers, float(y_eq[0]))


def solve_relaxed_lp(objective_upper, moment_lower, moment_upper, box):
    """
    Partition relaxation: one weight per box q with moment ranges
    [moment_lower[:, q], moment_upper[:, q]] and objective bound
    objective_upper[q].

        maximize sum w_q G_q  s.t.  sum w_q F^lo_q <= B^hi,
                                     sum w_q F^hi_q >= B^lo,  sum w = 1, w >= 0

    Every distribution on the union of the boxes maps to a feasible w, so the
    optimum bounds the true supremum from above. All data must be finite.
    """
    G = np.asarray(objective_upper, dtype=float)
    F_lo = np.atleast_2d(np.asarray(moment_lower, dtype=float))
    F_hi = np.atleast_2d(np.asarray(moment_upper, dtype=float))
    k = F_lo.shape[0]
    A_ub = np.vstack([F_lo, -F_hi])
    b_ub = np.concatenate([np.asarray(box.upper), -np.asarray(box.lower)])
    status, w, y_ub, y_eq = _solve_standard(G, A_ub, b_ub, np.ones((1, G.size)), np.ones(1))
    if status != OPTIMAL:
        return LpSolution(np.zeros(G.size), np.inf if status == UNBOUNDED_GUARD else -np.inf, status)
    w = w / w.sum()
    multipliers = y_ub[:k] - y_ub[k:]
    return LpSolution(w, float(G @ w), OPTIMAL, multipliers, float(y_eq[0]))
