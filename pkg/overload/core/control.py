"""Fairness control through the MaxWeight weights D.

A target direction theta is reachable when some subset of service vectors shares a
relevant boundary v whose support matches theta, and rho can be written as
c * theta + sum_m alpha_m S_m over that subset. Placing the boundary on theta then takes
D_qq = v_q / theta_q.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import metrics
from .errors import GeometryError, PreconditionError
from .eta import EtaSolution, verify_fixed_point
from .geometry import BoundaryVector, is_stabilizable, relevant_boundaries
from .linprog import linprog
from .model import (
    FairnessTarget,
    LoadVector,
    MixtureWeights,
    ServiceSet,
    WeightMatrix,
    check_dimension,
)
from ..config import settings

logger = logging.getLogger(__name__)


class FeasibilityVerdict(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE_NO_BOUNDARY = "infeasible_no_boundary"
    INFEASIBLE_DIRECTION = "infeasible_direction"
    STABLE = "stable"


@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    """Verdict for a target direction, with the full witness when feasible."""

    verdict: FeasibilityVerdict
    theta: FairnessTarget
    subset: Optional[Tuple[int, ...]] = None
    v: Optional[BoundaryVector] = None
    alpha: Optional[MixtureWeights] = None
    eta: Optional[np.ndarray] = None
    d: Optional[WeightMatrix] = None
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.verdict == FeasibilityVerdict.FEASIBLE


@dataclass(frozen=True, eq=False)
class PartitionCell:
    """Loads rho = c * theta + sum_{m in subset} alpha_m S_m (c > 0, alpha in the simplex).

    ``generators`` holds theta in row 0 followed by the subset's service vectors.
    """

    subset: Tuple[int, ...]
    v: BoundaryVector
    d: WeightMatrix
    generators: np.ndarray


@dataclass(frozen=True, eq=False)
class OverloadPartition:
    theta: FairnessTarget
    service_set: ServiceSet
    cells: Tuple[PartitionCell, ...]


@dataclass(frozen=True, eq=False)
class FeasibleDirectionSet:
    """Convex hull of ``generators`` (rows, each summing to 1) for one boundary."""

    subset: Tuple[int, ...]
    v: Optional[BoundaryVector]
    generators: np.ndarray


@dataclass(frozen=True)
class DirectionReport:
    stable: bool
    sets: Tuple[FeasibleDirectionSet, ...] = ()


def _target(theta: Union[FairnessTarget, Sequence[float]]) -> FairnessTarget:
    return theta if isinstance(theta, FairnessTarget) else FairnessTarget.from_weights(theta)


def _rho_array(rho: Union[LoadVector, Sequence[float]]) -> np.ndarray:
    return np.asarray(rho.rho if isinstance(rho, LoadVector) else rho, dtype=np.float64)


def synthesize_d(
    target: Union[FairnessTarget, Sequence[float], np.ndarray],
    v: Union[BoundaryVector, Sequence[float], np.ndarray],
) -> WeightMatrix:
    """MaxWeight weights that move boundary v onto the target direction.

    D_qq = v_q / target_q where v_q > 0, and 1 elsewhere. D is unique up to a positive
    scalar; use ``WeightMatrix.display`` for the diag(1, ...) form.

    Raises:
        PreconditionError: If v_q = 0 and target_q = 0 do not coincide
    """
    t = np.asarray(target.theta if isinstance(target, FairnessTarget) else target, dtype=np.float64)
    vv = np.asarray(v.v if isinstance(v, BoundaryVector) else v, dtype=np.float64)
    check_dimension("boundary vector", vv.size, t.size)
    if np.any((vv > 0) != (t > 0)):
        raise PreconditionError(
            f"boundary support {np.flatnonzero(vv > 0).tolist()} does not match "
            f"target support {np.flatnonzero(t > 0).tolist()}"
        )
    d = np.ones(t.size)
    pos = vv > 0
    d[pos] = vv[pos] / t[pos]
    return WeightMatrix(d)


def _condition_two(
    theta: np.ndarray,
    rho: np.ndarray,
    service_set: ServiceSet,
    subset: Sequence[int],
    alpha_min: float,
    c_min: float,
) -> Optional[Tuple[np.ndarray, float]]:
    """Solve rho - sum_{m in subset} alpha_m S_m = c * theta with every alpha_m >= alpha_min.

    Queues outside theta's support only need rho_q - (S alpha)_q <= 0. Variables are the
    excesses alpha' = alpha - alpha_min and c' = c - c_min.

    Returns:
        (alpha over all N vectors, c) or None
    """
    members = list(subset)
    k = len(members)
    if k * alpha_min > 1.0:
        return None
    sub = service_set.matrix[members]  # k x Q
    support = theta > 0
    base = alpha_min * sub.sum(axis=0)

    eq_rows, eq_rhs, ub_rows, ub_rhs = [], [], [], []
    for q in range(theta.size):
        if support[q]:
            eq_rows.append(np.append(sub[:, q], theta[q]))
            eq_rhs.append(rho[q] - base[q] - c_min * theta[q])
        else:
            ub_rows.append(np.append(-sub[:, q], 0.0))
            ub_rhs.append(base[q] - rho[q])
    eq_rows.append(np.append(np.ones(k), 0.0))
    eq_rhs.append(1.0 - k * alpha_min)

    result = linprog(
        np.zeros(k + 1),
        np.array(ub_rows) if ub_rows else None,
        np.array(ub_rhs) if ub_rhs else None,
        np.array(eq_rows),
        np.array(eq_rhs),
    )
    if not result.success:
        return None
    alpha = np.zeros(service_set.n)
    alpha[members] = result.x[:k] + alpha_min
    return alpha, float(result.x[-1] + c_min)


def _mixture_spread(
    theta: np.ndarray,
    rho: np.ndarray,
    service_set: ServiceSet,
    alpha_min: float,
    c_min: float,
) -> Optional[int]:
    """How many service vectors can carry weight in a mixture realizing theta.

    Returns None when no mixture over all N vectors realizes theta at all.
    """
    n = service_set.n
    matrix = service_set.matrix
    support = theta > 0
    eq_rows, eq_rhs, ub_rows, ub_rhs = [], [], [], []
    for q in range(theta.size):
        if support[q]:
            eq_rows.append(np.append(matrix[:, q], theta[q]))
            eq_rhs.append(rho[q] - c_min * theta[q])
        else:
            ub_rows.append(np.append(-matrix[:, q], 0.0))
            ub_rhs.append(-rho[q])
    eq_rows.append(np.append(np.ones(n), 0.0))
    eq_rhs.append(1.0)
    A_ub = np.array(ub_rows) if ub_rows else None
    b_ub = np.array(ub_rhs) if ub_rhs else None

    spread = 0
    for m in range(n):
        c = np.zeros(n + 1)
        c[m] = -1.0
        result = linprog(c, A_ub, b_ub, np.array(eq_rows), np.array(eq_rhs))
        if not result.success:
            return None
        if result.x[m] > alpha_min:
            spread += 1
    return spread


def _report(verdict: FeasibilityVerdict, theta: FairnessTarget, **kwargs) -> FeasibilityReport:
    metrics.feasibility_verdicts.labels(verdict=verdict.value).inc()
    return FeasibilityReport(verdict=verdict, theta=theta, **kwargs)


def check_feasibility(
    theta: Union[FairnessTarget, Sequence[float]],
    rho: Union[LoadVector, Sequence[float]],
    service_set: ServiceSet,
    alpha_min: Optional[float] = None,
    c_min: Optional[float] = None,
) -> FeasibilityReport:
    """Decide whether MaxWeight can grow the backlog along theta at load rho.

    Verdicts:
        feasible: a relevant boundary with matching support realizes theta; the report
            carries subset, v, alpha, eta and the synthesized D
        infeasible_no_boundary: theta is realized by mixing two or more service vectors,
            but none of those subsets has a matching relevant boundary
        infeasible_direction: no mixture of service vectors realizes theta at rho
        stable: rho is stabilizable, so there is no growth to steer
    """
    alpha_min = settings.alpha_min if alpha_min is None else alpha_min
    c_min = settings.c_min if c_min is None else c_min
    target = _target(theta)
    rho_arr = _rho_array(rho)
    check_dimension("load vector", rho_arr.size, service_set.q)
    check_dimension("fairness target", target.dim, service_set.q)
    t = target.theta

    if is_stabilizable(rho_arr, service_set):
        logger.warning("Load is stabilizable; fairness direction does not apply")
        return _report(FeasibilityVerdict.STABLE, target, reason="rho is inside the stability region")

    if service_set.n == 1:
        eta = np.clip(rho_arr - service_set.matrix[0], 0.0, None)
        if np.allclose(eta / eta.sum(), t, atol=1e-9):
            v = BoundaryVector(v=target.support.astype(np.float64), subset=(0,))
            return _report(
                FeasibilityVerdict.FEASIBLE,
                target,
                subset=(0,),
                v=v,
                alpha=MixtureWeights(np.ones(1)),
                eta=eta,
                d=synthesize_d(t, v),
                reason="single service vector grows along theta",
            )
        return _report(
            FeasibilityVerdict.INFEASIBLE_DIRECTION,
            target,
            reason="a single service vector leaves no control over the growth direction",
        )

    boundaries = relevant_boundaries(service_set, support=target.support)
    for bv in boundaries:
        found = _condition_two(t, rho_arr, service_set, bv.subset, alpha_min, c_min)
        if found is None:
            continue
        alpha, c = found
        d = synthesize_d(t, bv)
        eta = np.clip(rho_arr - alpha @ service_set.matrix, 0.0, None)
        witness = EtaSolution(
            eta=eta,
            alpha=MixtureWeights(alpha),
            objective=float(eta @ (d.d * eta)),
            kkt_residual=0.0,
            iterations=0,
        )
        check = verify_fixed_point(witness, rho_arr, service_set, d)
        if not check.ok:
            logger.warning(f"Witness for subset {bv.subset} failed the fixed-point check: {check.residuals}")
            continue
        logger.info(f"Theta feasible via subset {bv.subset} with D={np.round(d.display(), 9).tolist()}")
        return _report(
            FeasibilityVerdict.FEASIBLE,
            target,
            subset=bv.subset,
            v=bv,
            alpha=MixtureWeights(alpha),
            eta=eta,
            d=d,
            reason=f"growth scale c={c:.9g}",
        )

    spread = _mixture_spread(t, rho_arr, service_set, alpha_min, c_min)
    if spread is not None and spread >= 2:
        return _report(
            FeasibilityVerdict.INFEASIBLE_NO_BOUNDARY,
            target,
            reason="theta needs a mixture whose service vectors share no relevant boundary",
        )
    return _report(
        FeasibilityVerdict.INFEASIBLE_DIRECTION,
        target,
        reason="no mixture of service vectors grows the backlog along theta at this load",
    )


def _simplex_vertices(
    sub: np.ndarray,
    rho: np.ndarray,
    mask: np.ndarray,
    tol: float = 1e-9,
) -> List[np.ndarray]:
    """Vertices of {alpha in the simplex : (S alpha)_q <= rho_q on mask, >= rho_q off mask}."""
    k = sub.shape[0]
    rows = [-np.eye(k)[i] for i in range(k)]
    rhs = [0.0] * k
    for q in range(rho.size):
        if mask[q]:
            rows.append(sub[:, q])
            rhs.append(rho[q])
        else:
            rows.append(-sub[:, q])
            rhs.append(-rho[q])
    G, h = np.array(rows), np.array(rhs)

    vertices: List[np.ndarray] = []
    for active in itertools.combinations(range(G.shape[0]), k - 1):
        system = np.vstack([G[list(active)], np.ones((1, k))])
        if abs(np.linalg.det(system)) < 1e-12:
            continue
        alpha = np.linalg.solve(system, np.append(h[list(active)], 1.0))
        if np.all(G @ alpha <= h + tol * max(1.0, float(np.abs(h).max()))):
            if not any(np.allclose(alpha, w, atol=1e-9) for w in vertices):
                vertices.append(alpha)
    return vertices


def _hull_points(points: np.ndarray) -> np.ndarray:
    """Extreme points of directions on the simplex (Q <= 3), in hull order."""
    if points.shape[0] <= 1:
        return points
    if points.shape[1] <= 2:
        order = np.argsort(points[:, 0], kind="stable")
        lo, hi = points[order[0]], points[order[-1]]
        return lo[None, :] if np.allclose(lo, hi) else np.vstack([lo, hi])

    # monotone chain on the first two coordinates
    pts = sorted({(round(p[0], 12), round(p[1], 12)): p for p in points}.items())
    if len(pts) <= 2:
        return np.array([p for _, p in pts])

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    keys = [k for k, _ in pts]
    lookup = dict(pts)
    lower: list = []
    for k in keys:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], k) <= 1e-12:
            lower.pop()
        lower.append(k)
    upper: list = []
    for k in reversed(keys):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], k) <= 1e-12:
            upper.pop()
        upper.append(k)
    chain = lower[:-1] + upper[:-1]
    return np.array([lookup[k] for k in chain])


def feasible_directions(
    rho: Union[LoadVector, Sequence[float]],
    service_set: ServiceSet,
) -> DirectionReport:
    """Every fairness direction reachable by MaxWeight at load rho (Q <= 3).

    For each relevant boundary, the reachable directions are the normalized
    (rho - sum alpha_m S_m)^+ over mixtures of the boundary's subset whose positive part
    matches the boundary's support; the set is the convex hull of the returned generators.

    Raises:
        PreconditionError: If Q > 3
    """
    rho_arr = _rho_array(rho)
    q = service_set.q
    check_dimension("load vector", rho_arr.size, q)
    if q > 3:
        raise PreconditionError(f"feasible direction enumeration supports Q <= 3, got Q={q}")
    if is_stabilizable(rho_arr, service_set):
        return DirectionReport(stable=True)

    if service_set.n == 1:
        eta = np.clip(rho_arr - service_set.matrix[0], 0.0, None)
        return DirectionReport(
            stable=False,
            sets=(FeasibleDirectionSet(subset=(0,), v=None, generators=(eta / eta.sum())[None, :]),),
        )

    sets = []
    seen = set()
    for bits in itertools.product([False, True], repeat=q):
        mask = np.array(bits)
        if not mask.any():
            continue
        for bv in relevant_boundaries(service_set, support=mask):
            key = (bv.subset, bits)
            if key in seen:
                continue
            seen.add(key)
            sub = service_set.matrix[list(bv.subset)]
            directions = []
            for alpha in _simplex_vertices(sub, rho_arr, mask):
                eta = np.clip(rho_arr - alpha @ sub, 0.0, None)
                eta[~mask] = 0.0
                if eta.sum() > 1e-12:
                    directions.append(eta / eta.sum())
            if directions:
                sets.append(
                    FeasibleDirectionSet(
                        subset=bv.subset, v=bv, generators=_hull_points(np.array(directions))
                    )
                )
    return DirectionReport(stable=False, sets=tuple(sets))


def partition_overload(
    theta: Union[FairnessTarget, Sequence[float]],
    service_set: ServiceSet,
) -> OverloadPartition:
    """One cell per relevant boundary whose support matches theta, each with its D."""
    target = _target(theta)
    check_dimension("fairness target", target.dim, service_set.q)
    if service_set.n < 2:
        raise PreconditionError("partitioning needs at least two service vectors")
    cells = []
    for bv in relevant_boundaries(service_set, support=target.support):
        generators = np.vstack([target.theta, service_set.matrix[list(bv.subset)]])
        generators.setflags(write=False)
        cells.append(
            PartitionCell(
                subset=bv.subset,
                v=bv,
                d=synthesize_d(target, bv),
                generators=generators,
            )
        )
    logger.info(f"Overload partition for theta={np.round(target.theta, 9).tolist()}: {len(cells)} cells")
    return OverloadPartition(theta=target, service_set=service_set, cells=tuple(cells))


def classify_rho(
    rho: Union[LoadVector, Sequence[float]],
    partition: OverloadPartition,
    alpha_min: Optional[float] = None,
    c_min: Optional[float] = None,
) -> Optional[WeightMatrix]:
    """D of the partition cell containing rho, or None if theta is infeasible there.

    Raises:
        PreconditionError: If rho is stabilizable
        GeometryError: If more than one cell contains rho
    """
    alpha_min = settings.alpha_min if alpha_min is None else alpha_min
    c_min = settings.c_min if c_min is None else c_min
    rho_arr = _rho_array(rho)
    service_set = partition.service_set
    check_dimension("load vector", rho_arr.size, service_set.q)
    if is_stabilizable(rho_arr, service_set):
        raise PreconditionError("classification applies to overloaded loads only")

    matches = [
        cell
        for cell in partition.cells
        if _condition_two(partition.theta.theta, rho_arr, service_set, cell.subset, alpha_min, c_min)
        is not None
    ]
    if len(matches) > 1:
        raise GeometryError(
            f"load {rho_arr.tolist()} falls in {len(matches)} cells: {[c.subset for c in matches]}"
        )
    return matches[0].d if matches else None
