"""Dense two-phase simplex for the small linear programs of the toolkit.

Solves

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

with a full tableau and Bland's rule (lowest-index entering and leaving variables), which
cannot cycle.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import metrics
from .errors import NumericalError
from ..config import settings

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinProgResult:
    """Outcome of a linear program."""

    status: str
    x: Optional[np.ndarray]
    fun: Optional[float]
    iterations: int

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(tableau: np.ndarray, row: int, col: int):
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i] -= tableau[i, col] * tableau[row]


def _run_simplex(
    tableau: np.ndarray,
    basis: list,
    cost: np.ndarray,
    n_cols: int,
    tol: float,
    max_iter: int,
) -> tuple:
    """Iterate Bland pivots on ``tableau`` until optimal or unbounded.

    Returns:
        (status, iterations)
    """
    for it in range(max_iter):
        body = tableau[:, :n_cols]
        reduced = cost[:n_cols] - cost[basis] @ body
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            return OPTIMAL, it
        col = int(candidates[0])

        column = body[:, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))

        _pivot(tableau, row, col)
        basis[row] = col
        # clip round-off on the right-hand side
        rhs = tableau[:, -1]
        rhs[(rhs < 0) & (rhs > -tol)] = 0.0

    raise NumericalError(f"simplex did not terminate within {max_iter} pivots")


def linprog(
    c: np.ndarray,
    A_ub: Optional[np.ndarray] = None,
    b_ub: Optional[np.ndarray] = None,
    A_eq: Optional[np.ndarray] = None,
    b_eq: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> LinProgResult:
    """Solve a linear program over non-negative variables.

    Args:
        c: Cost vector (n,)
        A_ub, b_ub: Inequality rows ``A_ub @ x <= b_ub``
        A_eq, b_eq: Equality rows ``A_eq @ x == b_eq``
        tol: Pivot and feasibility tolerance (defaults to settings.lp_tol)

    Returns:
        LinProgResult with status optimal, infeasible or unbounded
    """
    tol = settings.lp_tol if tol is None else tol
    c = np.asarray(c, dtype=np.float64)
    n = c.size

    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=np.float64))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=np.float64))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64).ravel()

    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    if A_ub.shape[1] != n or A_eq.shape[1] != n or b_ub.size != m_ub or b_eq.size != m_eq:
        raise ValueError("linear program dimensions are inconsistent")

    # [x | slacks | artificials | rhs]
    n_std = n + m_ub
    A = np.zeros((m, n_std))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:n_std] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1.0
    b = np.abs(b)

    tableau = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n_std, n_std + m))
    max_iter = 50 * (m + n_std + 1)
    feas_tol = tol * max(1.0, float(np.abs(b).max(initial=0.0)))

    # Phase 1: minimize the sum of artificials
    cost1 = np.concatenate([np.zeros(n_std), np.ones(m)])
    status, it1 = _run_simplex(tableau, basis, cost1, n_std + m, tol, max_iter)
    if status != OPTIMAL:
        raise NumericalError("phase-1 simplex reported an unbounded auxiliary problem")
    if tableau[:, -1] @ cost1[basis] > feas_tol * max(1, m):
        metrics.lp_solves.labels(status=INFEASIBLE).inc()
        return LinProgResult(INFEASIBLE, None, None, it1)

    # Drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for row in range(m):
        if basis[row] < n_std:
            keep.append(row)
            continue
        candidates = np.flatnonzero(np.abs(tableau[row, :n_std]) > tol)
        if candidates.size:
            col = int(candidates[0])
            _pivot(tableau, row, col)
            basis[row] = col
            keep.append(row)
    tableau = np.hstack([tableau[keep, :n_std], tableau[keep, -1:]])
    basis = [basis[r] for r in keep]

    # Phase 2
    cost2 = np.concatenate([c, np.zeros(m_ub)])
    status, it2 = _run_simplex(tableau, basis, cost2, n_std, tol, max_iter)
    iterations = it1 + it2
    metrics.lp_solves.labels(status=status).inc()
    if status == UNBOUNDED:
        return LinProgResult(UNBOUNDED, None, None, iterations)

    x = np.zeros(n_std)
    x[basis] = tableau[:, -1]
    x = np.clip(x[:n], 0.0, None)
    return LinProgResult(OPTIMAL, x, float(c @ x), iterations)


def is_feasible(
    A_ub: Optional[np.ndarray] = None,
    b_ub: Optional[np.ndarray] = None,
    A_eq: Optional[np.ndarray] = None,
    b_eq: Optional[np.ndarray] = None,
    n: Optional[int] = None,
    tol: Optional[float] = None,
) -> Optional[np.ndarray]:
    """Return a feasible point of the constraint system, or None."""
    if n is None:
        source = A_ub if A_ub is not None else A_eq
        n = np.atleast_2d(source).shape[1]
    result = linprog(np.zeros(n), A_ub, b_ub, A_eq, b_eq, tol=tol)
    return result.x if result.success else None
