"""Polytope and cone computations over a service set.

Covers stability-region membership, non-essential service vectors, MaxWeight cone
assignment, boundary vectors between cones and the enumeration of relevant boundaries.
All indices are 0-based.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import BudgetExceededError, PreconditionError
from .linprog import is_feasible, linprog
from .model import (
    LoadVector,
    ServiceSet,
    WeightMatrix,
    WorkloadVector,
    check_dimension,
)
from ..config import settings

logger = logging.getLogger(__name__)

VectorLike = Union[np.ndarray, Sequence[float]]

# Share of the best dominance margin a boundary representative must keep
INTERIOR_MARGIN = 0.5


@dataclass(frozen=True, eq=False)
class BoundaryVector:
    """Non-negative vector on which the cones of ``subset`` meet.

    ``v`` is normalized so that its largest component is 1.
    """

    v: np.ndarray
    subset: Tuple[int, ...]

    @property
    def support(self) -> np.ndarray:
        return self.v > 0


@dataclass(frozen=True)
class ConeAssignment:
    """Service vectors attaining the MaxWeight maximum at a workload."""

    maximizers: Tuple[int, ...]


def _values(obj, attr: str) -> np.ndarray:
    return np.asarray(getattr(obj, attr) if hasattr(obj, attr) else obj, dtype=np.float64)


def dominating_mixture(target: VectorLike, service_set: ServiceSet) -> Optional[np.ndarray]:
    """Find alpha >= 0, sum(alpha) = 1 with sum_m alpha_m S_m >= target, or None."""
    target = np.asarray(target, dtype=np.float64)
    check_dimension("load vector", target.size, service_set.q)
    matrix = service_set.matrix
    return is_feasible(
        A_ub=-matrix.T,
        b_ub=-target,
        A_eq=np.ones((1, service_set.n)),
        b_eq=np.ones(1),
    )


def is_stabilizable(rho: Union[LoadVector, VectorLike], service_set: ServiceSet) -> bool:
    """True iff rho is dominated by a convex combination of the service vectors."""
    return dominating_mixture(_values(rho, "rho"), service_set) is not None


def non_essential(service_set: ServiceSet) -> Tuple[int, ...]:
    """Indices of service vectors dominated by a convex combination of the others."""
    if service_set.n < 2:
        return ()
    matrix = service_set.matrix
    found = []
    for j in range(service_set.n):
        others = np.delete(matrix, j, axis=0)
        alpha = is_feasible(
            A_ub=-others.T,
            b_ub=-matrix[j],
            A_eq=np.ones((1, others.shape[0])),
            b_eq=np.ones(1),
        )
        if alpha is not None:
            found.append(j)
    if found:
        logger.debug(f"Non-essential service vectors: {found}")
    return tuple(found)


def maxweight_scores(x: np.ndarray, d: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """<S_m, D x> for every service vector."""
    return matrix @ (d * x)


def argmax_set(scores: np.ndarray, tau_eq: Optional[float] = None) -> Tuple[int, ...]:
    """Indices within tau_eq (relative to the largest magnitude) of the maximum."""
    tau_eq = settings.tau_eq if tau_eq is None else tau_eq
    best = scores.max()
    tol = tau_eq * float(np.abs(scores).max())
    return tuple(int(i) for i in np.flatnonzero(scores >= best - tol))


def cone_of(
    x: Union[WorkloadVector, VectorLike],
    d: WeightMatrix,
    service_set: ServiceSet,
    tau_eq: Optional[float] = None,
) -> ConeAssignment:
    """Service vectors whose MaxWeight cone contains the workload x."""
    x = _values(x, "x")
    check_dimension("workload", x.size, service_set.q)
    check_dimension("weight diagonal", d.dim, service_set.q)
    scores = maxweight_scores(x, d.d, service_set.matrix)
    return ConeAssignment(argmax_set(scores, tau_eq))


def boundary_vector(
    subset: Sequence[int],
    service_set: ServiceSet,
    support: Optional[VectorLike] = None,
    tau_eq: Optional[float] = None,
) -> Optional[BoundaryVector]:
    """Find v >= 0 on which the cones of ``subset`` meet and strictly dominate the rest.

    The search runs in two LPs over v normalized to sum 1. The first maximizes the margin s
    by which the common inner product <v, S_i> (i in subset) exceeds every outside <v, S_m>;
    no boundary exists unless s is positive. The second maximizes the smallest component of v
    over the strict-dominance solutions whose margin is at least ``INTERIOR_MARGIN * s``, so
    the representative is strictly interior when possible. Requiring the full margin would pin
    v to a vertex of the boundary face whenever the face has more than one direction.

    Args:
        subset: Indices of at least two service vectors
        service_set: Service vectors
        support: Optional boolean mask; v must be zero off the mask and positive on it
        tau_eq: Relative tolerance for the strict-dominance margin

    Returns:
        BoundaryVector normalized to max component 1, or None
    """
    tau_eq = settings.tau_eq if tau_eq is None else tau_eq
    members = tuple(sorted(set(int(i) for i in subset)))
    if len(members) < 2:
        raise PreconditionError("a boundary needs at least two service vectors")
    if members[0] < 0 or members[-1] >= service_set.n:
        raise PreconditionError(f"subset {members} out of range for N={service_set.n}")

    matrix = service_set.matrix
    q = service_set.q
    if support is None:
        free = np.arange(q)
    else:
        mask = np.asarray(support, dtype=bool)
        check_dimension("support mask", mask.size, q)
        free = np.flatnonzero(mask)
        if free.size == 0:
            return None
    sub = matrix[:, free]
    k = free.size
    outsiders = [m for m in range(service_set.n) if m not in members]
    anchor = sub[members[0]]

    eq_rows = [sub[i] - anchor for i in members[1:]] + [np.ones(k)]
    eq_rhs = [0.0] * (len(members) - 1) + [1.0]
    scale = max(1.0, float(np.abs(matrix).max()))

    # Stage 1: largest dominance margin, variables [v_free, s]
    margin = 0.0
    if outsiders:
        A_eq = np.hstack([np.array(eq_rows), np.zeros((len(eq_rows), 1))])
        A_ub = np.hstack([np.array([sub[m] - anchor for m in outsiders]), np.ones((len(outsiders), 1))])
        c = np.zeros(k + 1)
        c[-1] = -1.0
        stage1 = linprog(c, A_ub, np.zeros(len(outsiders)), A_eq, np.array(eq_rhs))
        if not stage1.success:
            return None
        margin = float(stage1.x[-1])
        if margin <= tau_eq * scale:
            return None
    else:
        if is_feasible(A_eq=np.array(eq_rows), b_eq=np.array(eq_rhs), n=k) is None:
            return None

    # Stage 2: most interior representative, variables [v_free, t]
    A_eq = np.hstack([np.array(eq_rows), np.zeros((len(eq_rows), 1))])
    ub_rows = [np.append(-np.eye(k)[j], 1.0) for j in range(k)]
    ub_rhs = [0.0] * k
    for m in outsiders:
        ub_rows.append(np.append(sub[m] - anchor, 0.0))
        ub_rhs.append(-INTERIOR_MARGIN * margin)
    c = np.zeros(k + 1)
    c[-1] = -1.0
    stage2 = linprog(c, np.array(ub_rows), np.array(ub_rhs), A_eq, np.array(eq_rhs))
    if not stage2.success:
        return None
    v_free = stage2.x[:k]
    if support is not None and stage2.x[-1] <= tau_eq:
        return None

    v = np.zeros(q)
    v[free] = v_free
    v[v < tau_eq * v.max()] = 0.0
    v = v / v.max()
    v.setflags(write=False)
    return BoundaryVector(v=v, subset=members)


def relevant_boundaries(
    service_set: ServiceSet,
    support: Optional[VectorLike] = None,
    tau_eq: Optional[float] = None,
) -> List[BoundaryVector]:
    """All subsets of size >= 2 that admit a boundary vector, smallest subsets first."""
    n = service_set.n
    if n < 2:
        raise PreconditionError("relevant boundaries need at least two service vectors")
    if n > settings.max_vectors:
        raise BudgetExceededError(
            f"subset enumeration is limited to N <= {settings.max_vectors}, got N={n}"
        )
    found = []
    for size in range(2, n + 1):
        for subset in itertools.combinations(range(n), size):
            bv = boundary_vector(subset, service_set, support=support, tau_eq=tau_eq)
            if bv is not None:
                found.append(bv)
    logger.debug(f"Found {len(found)} relevant boundaries among {2 ** n - n - 1} subsets")
    return found
