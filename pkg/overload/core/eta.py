"""Backlog growth ray of an overloaded system under MaxWeight.

In overload the scaled backlog X(t)/t converges to a unique ray eta, the minimizer of

    f(alpha) = <(rho - sum_m alpha_m S_m)^+, D (rho - sum_m alpha_m S_m)^+>

over {alpha >= 0, sum(alpha) <= 1}. This module solves that program, verifies candidate
fixed points, provides a brute-force grid oracle, and computes the max-min and
proportional fairness rays.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple, Union

import numpy as np

from . import metrics
from .errors import BudgetExceededError, ConvergenceError, NumericalError, PreconditionError
from .geometry import dominating_mixture, is_stabilizable
from .linprog import is_feasible, linprog
from .model import (
    LoadVector,
    MixtureWeights,
    ServiceSet,
    WeightMatrix,
    check_dimension,
)
from ..config import settings

logger = logging.getLogger(__name__)

# Active-set thresholds tried by the polish step (relative to max |rho|)
_ACTIVE_THRESHOLDS = (1e-10, 1e-6)
# Relative slack for the cone set used by the polish step
_CONE_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class EtaSolution:
    """Growth ray with the mixture that realizes it and solver diagnostics."""

    eta: np.ndarray
    alpha: MixtureWeights
    objective: float
    kkt_residual: float
    iterations: int
    stable: bool = False


@dataclass(frozen=True)
class FixedPointReport:
    """Outcome of a fixed-point check with the residual of every condition."""

    ok: bool
    residuals: Dict[str, float] = field(default_factory=dict)
    stable: bool = False


def _rho_array(rho: Union[LoadVector, np.ndarray]) -> np.ndarray:
    return np.asarray(rho.rho if isinstance(rho, LoadVector) else rho, dtype=np.float64)


def _check_inputs(rho: np.ndarray, service_set: ServiceSet, d: Optional[WeightMatrix] = None):
    check_dimension("load vector", rho.size, service_set.q)
    if d is not None:
        check_dimension("weight diagonal", d.dim, service_set.q)


def project_subsimplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {alpha >= 0, sum(alpha) <= 1}."""
    w = np.clip(v, 0.0, None)
    if w.sum() <= 1.0:
        return w
    # projection onto the probability simplex (sort and threshold)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    k = np.flatnonzero(u - cssv / ind > 0)[-1]
    tau = cssv[k] / (k + 1)
    return np.clip(v - tau, 0.0, None)


def growth_objective(alpha: np.ndarray, rho: np.ndarray, matrix: np.ndarray, d: np.ndarray) -> float:
    eta = np.clip(rho - alpha @ matrix, 0.0, None)
    return float(eta @ (d * eta))


def _make_solution(
    alpha: np.ndarray,
    rho: np.ndarray,
    matrix: np.ndarray,
    d: np.ndarray,
    iterations: int,
    stable: bool = False,
) -> EtaSolution:
    alpha = np.clip(alpha, 0.0, None)
    if alpha.sum() > 1.0:
        alpha = alpha / alpha.sum()
    eta = np.clip(rho - alpha @ matrix, 0.0, None)
    grad = -2.0 * matrix @ (d * eta)
    kkt = float(np.abs(alpha - project_subsimplex(alpha - grad)).max())
    eta.setflags(write=False)
    return EtaSolution(
        eta=eta,
        alpha=MixtureWeights(alpha),
        objective=float(eta @ (d * eta)),
        kkt_residual=kkt,
        iterations=iterations,
        stable=stable,
    )


def verify_fixed_point(
    candidate: EtaSolution,
    rho: Union[LoadVector, np.ndarray],
    service_set: ServiceSet,
    d: WeightMatrix,
    tau_fix: Optional[float] = None,
) -> FixedPointReport:
    """Check that (eta, alpha) is a MaxWeight fixed point.

    Conditions:
        recursion: eta = (rho - sum alpha_m S_m)^+
        simplex: alpha >= 0 and sum(alpha) = 1 (waived when eta = 0 and rho is stabilizable)
        complementarity: alpha_m > tau_fix implies <eta, D S_m> is maximal
        identity: <eta, D eta> = <rho, D eta> - max_S <S, D eta>
    """
    tau_fix = settings.tau_fix if tau_fix is None else tau_fix
    rho = _rho_array(rho)
    _check_inputs(rho, service_set, d)
    eta = np.asarray(candidate.eta, dtype=np.float64)
    alpha = np.asarray(candidate.alpha.alpha, dtype=np.float64)
    check_dimension("growth ray", eta.size, service_set.q)
    check_dimension("mixture weights", alpha.size, service_set.n)
    matrix = service_set.matrix
    dw = d.d

    rho_scale = max(1.0, float(np.abs(rho).max()))
    recursion = float(np.abs(eta - np.clip(rho - alpha @ matrix, 0.0, None)).max())

    scores = matrix @ (dw * eta)
    score_scale = max(1.0, float(np.abs(scores).max()))
    used = alpha > tau_fix
    complementarity = float((scores.max() - scores[used]).max()) if used.any() else 0.0

    lhs = float(eta @ (dw * eta))
    rhs = float(rho @ (dw * eta) - scores.max())
    identity_scale = max(1.0, abs(float(rho @ (dw * eta))))
    identity = abs(lhs - rhs)

    stable = bool(np.all(eta <= tau_fix * rho_scale)) and is_stabilizable(rho, service_set)
    if stable:
        simplex = max(0.0, float(alpha.sum() - 1.0), float(-alpha.min()))
    else:
        simplex = max(abs(float(alpha.sum() - 1.0)), float(-alpha.min()))

    residuals = {
        "recursion": recursion,
        "simplex": simplex,
        "complementarity": complementarity,
        "identity": identity,
    }
    ok = (
        recursion <= tau_fix * rho_scale
        and simplex <= tau_fix
        and complementarity <= tau_fix * score_scale
        and identity <= tau_fix * identity_scale
    )
    return FixedPointReport(ok=bool(ok), residuals=residuals, stable=stable)


def _polish(
    alpha: np.ndarray,
    rho: np.ndarray,
    service_set: ServiceSet,
    d: WeightMatrix,
    tau_fix: float,
) -> Optional[EtaSolution]:
    """Solve the equality-constrained problem on the current active set exactly.

    With J the queues where rho - S alpha is positive and M the service vectors in the
    current MaxWeight cone, the optimum satisfies

        S_JM^T D_J (rho_J - S_JM alpha_M) = lambda 1,  sum(alpha_M) = 1

    which fixes eta_J. A feasibility LP then recovers a non-negative alpha for that eta.
    """
    matrix = service_set.matrix
    dw = d.d
    residual = rho - alpha @ matrix
    eta = np.clip(residual, 0.0, None)
    scores = matrix @ (dw * eta)
    rho_scale = max(1.0, float(np.abs(rho).max()))

    cone = scores >= scores.max() - _CONE_SLACK * max(1.0, float(np.abs(scores).max()))
    member_sets = [np.flatnonzero(cone), np.flatnonzero(alpha > 1e-12)]

    for threshold in _ACTIVE_THRESHOLDS:
        active = np.flatnonzero(residual > threshold * rho_scale)
        inactive = np.setdiff1d(np.arange(rho.size), active)
        if active.size == 0:
            continue
        for members in member_sets:
            if members.size == 0:
                continue
            s_jm = matrix[np.ix_(members, active)].T
            d_j = dw[active]
            hessian = s_jm.T @ (d_j[:, None] * s_jm)
            k = members.size
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = hessian
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.append(s_jm.T @ (d_j * rho[active]), 1.0)
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            eta_j = rho[active] - s_jm @ sol[:k]
            if np.any(eta_j <= 0):
                continue

            sub = matrix[members]
            A_ub = -sub[:, inactive].T if inactive.size else None
            b_ub = -rho[inactive] if inactive.size else None
            A_eq = np.vstack([sub[:, active].T, np.ones((1, k))])
            b_eq = np.append(rho[active] - eta_j, 1.0)
            weights = is_feasible(A_ub, b_ub, A_eq, b_eq, n=k)
            if weights is None:
                continue
            full = np.zeros(service_set.n)
            full[members] = weights
            candidate = _make_solution(full, rho, matrix, dw, iterations=0)
            if verify_fixed_point(candidate, rho, service_set, d, tau_fix).ok:
                return candidate
    return None


def solve_eta(
    rho: Union[LoadVector, np.ndarray],
    service_set: ServiceSet,
    d: WeightMatrix,
    alpha0: Optional[np.ndarray] = None,
    tau_fix: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> EtaSolution:
    """Compute the growth ray eta for load rho under MaxWeight with weights D.

    Projected gradient with Armijo backtracking on the sub-simplex; every few iterations the
    active set of the iterate is solved exactly and accepted once the fixed-point check
    passes. Stabilizable loads return eta = 0 with ``stable=True``.

    Args:
        rho: Load vector
        service_set: Service vectors
        d: MaxWeight weights
        alpha0: Optional initial mixture (projected onto the sub-simplex)
        tau_fix: Fixed-point tolerance (defaults to settings.tau_fix)
        max_iter: Iteration ceiling (defaults to settings.eta_max_iter)

    Raises:
        ConvergenceError: If no fixed point is reached within max_iter; carries the best iterate
    """
    tau_fix = settings.tau_fix if tau_fix is None else tau_fix
    max_iter = settings.eta_max_iter if max_iter is None else max_iter
    rho = _rho_array(rho)
    _check_inputs(rho, service_set, d)
    matrix = service_set.matrix
    dw = d.d
    started = time.perf_counter()

    stable_mix = dominating_mixture(rho, service_set)
    if stable_mix is not None:
        zero = np.zeros(service_set.q)
        zero.setflags(write=False)
        solution = EtaSolution(
            eta=zero,
            alpha=MixtureWeights(stable_mix / max(1.0, stable_mix.sum())),
            objective=0.0,
            kkt_residual=0.0,
            iterations=0,
            stable=True,
        )
        metrics.eta_solves.labels(outcome="stable").inc()
        logger.info("Load is stabilizable; growth ray is zero")
        return solution

    n = service_set.n
    if alpha0 is None:
        alpha = np.full(n, 1.0 / n)
    else:
        alpha0 = np.asarray(alpha0, dtype=np.float64)
        check_dimension("initial mixture", alpha0.size, n)
        alpha = project_subsimplex(alpha0)

    curvature = 2.0 * float(np.linalg.eigvalsh(matrix @ (dw[:, None] * matrix.T)).max())
    step = 1.0 / max(curvature, 1e-12)
    best_alpha, best_f = alpha.copy(), growth_objective(alpha, rho, matrix, dw)

    for it in range(1, max_iter + 1):
        eta = np.clip(rho - alpha @ matrix, 0.0, None)
        f = float(eta @ (dw * eta))
        grad = -2.0 * matrix @ (dw * eta)

        while True:
            trial = project_subsimplex(alpha - step * grad)
            diff = trial - alpha
            f_trial = growth_objective(trial, rho, matrix, dw)
            if f_trial <= f + grad @ diff + (0.5 / step) * (diff @ diff) + 1e-15 * max(1.0, f):
                break
            step *= 0.5
            if step < 1e-18:
                break
        alpha = trial
        if f_trial < best_f:
            best_alpha, best_f = alpha.copy(), f_trial
        step *= 1.5

        if it == 1 or it % settings.eta_polish_every == 0 or not diff.any():
            polished = _polish(alpha, rho, service_set, d, tau_fix)
            if polished is not None:
                solution = EtaSolution(
                    eta=polished.eta,
                    alpha=polished.alpha,
                    objective=polished.objective,
                    kkt_residual=polished.kkt_residual,
                    iterations=it,
                )
                metrics.eta_solves.labels(outcome="converged").inc()
                metrics.eta_iterations.observe(it)
                logger.info(
                    f"Growth ray converged in {it} iterations "
                    f"({time.perf_counter() - started:.3f}s): eta={np.round(solution.eta, 9).tolist()}"
                )
                return solution
            current = _make_solution(alpha, rho, matrix, dw, iterations=it)
            if verify_fixed_point(current, rho, service_set, d, tau_fix).ok:
                metrics.eta_solves.labels(outcome="converged").inc()
                metrics.eta_iterations.observe(it)
                return current

    metrics.eta_solves.labels(outcome="failed").inc()
    best = _make_solution(best_alpha, rho, matrix, dw, iterations=max_iter)
    raise ConvergenceError(
        f"growth-ray solver did not reach a fixed point in {max_iter} iterations "
        f"(kkt residual {best.kkt_residual:.3e})",
        best=best,
    )


def _compositions(total: int, parts: int) -> Iterator[np.ndarray]:
    """Yield chunks of all non-negative integer vectors of length ``parts`` summing to total."""
    if parts == 1:
        yield np.array([[total]])
    elif parts == 2:
        a = np.arange(total + 1)
        yield np.column_stack([a, total - a])
    elif parts == 3:
        a, b = np.meshgrid(np.arange(total + 1), np.arange(total + 1), indexing="ij")
        keep = a + b <= total
        a, b = a[keep], b[keep]
        yield np.column_stack([a, b, total - a - b])
    else:
        for first in range(total + 1):
            for chunk in _compositions(total - first, parts - 1):
                yield np.column_stack([np.full(chunk.shape[0], first), chunk])


def eta_oracle(
    rho: Union[LoadVector, np.ndarray],
    service_set: ServiceSet,
    d: WeightMatrix,
    resolution: int,
    budget: Optional[float] = None,
) -> np.ndarray:
    """Brute-force the growth ray on a grid of mixtures with step 1/resolution.

    f is non-increasing in every alpha_m, so its minimum over {sum(alpha) <= 1} is attained
    on the face sum(alpha) = 1; only that face is gridded.

    Raises:
        BudgetExceededError: If N * resolution^(N-1) exceeds the budget
    """
    budget = settings.oracle_budget if budget is None else budget
    if resolution < 1:
        raise PreconditionError(f"resolution must be positive, got {resolution}")
    rho = _rho_array(rho)
    _check_inputs(rho, service_set, d)
    n = service_set.n
    cost = n * float(resolution) ** (n - 1)
    if cost > budget:
        raise BudgetExceededError(f"oracle grid cost {cost:.3g} exceeds budget {budget:.3g}")

    matrix = service_set.matrix
    dw = d.d
    best_f, best_eta = np.inf, np.zeros(service_set.q)
    for chunk in _compositions(resolution, n):
        alpha = chunk / resolution
        eta = np.clip(rho[None, :] - alpha @ matrix, 0.0, None)
        values = (eta * eta) @ dw
        i = int(np.argmin(values))
        if values[i] < best_f:
            best_f, best_eta = float(values[i]), eta[i]
    return best_eta


def maxmin_eta(rho: Union[LoadVector, np.ndarray], service_set: ServiceSet) -> np.ndarray:
    """Growth vector in Psi(rho, S) minimizing the largest component.

    Variables are [alpha (N), eta (Q), t]. The first LP minimizes t; the second minimizes
    sum(eta) with t held at its optimum. The result is (rho - sum alpha_m S_m)^+ for the
    second LP's alpha.
    """
    rho = _rho_array(rho)
    _check_inputs(rho, service_set)
    n, q = service_set.n, service_set.q
    matrix = service_set.matrix
    size = n + q + 1

    rows, rhs = [], []
    for j in range(q):
        row = np.zeros(size)
        row[:n] = -matrix[:, j]
        row[n + j] = -1.0
        rows.append(row)
        rhs.append(-rho[j])
    for j in range(q):
        row = np.zeros(size)
        row[n + j] = 1.0
        row[-1] = -1.0
        rows.append(row)
        rhs.append(0.0)
    row = np.zeros(size)
    row[:n] = 1.0
    rows.append(row)
    rhs.append(1.0)
    A_ub, b_ub = np.array(rows), np.array(rhs)

    c = np.zeros(size)
    c[-1] = 1.0
    first = linprog(c, A_ub, b_ub)
    if not first.success:
        raise NumericalError(f"max-min LP failed: {first.status}")
    t_star = first.fun

    cap = np.zeros(size)
    cap[-1] = 1.0
    c2 = np.zeros(size)
    c2[n:n + q] = 1.0
    second = linprog(
        c2,
        np.vstack([A_ub, cap]),
        np.append(b_ub, t_star * (1 + 1e-9) + 1e-12),
    )
    if not second.success:
        raise NumericalError(f"max-min tie-break LP failed: {second.status}")
    alpha = second.x[:n]
    return np.clip(rho - alpha @ matrix, 0.0, None)


def proportional_eta(
    rho: Union[LoadVector, np.ndarray],
    service_set: ServiceSet,
    tol: float = 1e-12,
) -> Tuple[np.ndarray, float]:
    """Smallest K in (0, 1) with (1 - K) rho stabilizable, by bisection.

    Returns:
        (K * rho, K)

    Raises:
        PreconditionError: If rho is stabilizable
    """
    rho = _rho_array(rho)
    _check_inputs(rho, service_set)
    if is_stabilizable(rho, service_set):
        raise PreconditionError("proportional growth is only defined for overloaded loads")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_stabilizable((1.0 - mid) * rho, service_set):
            hi = mid
        else:
            lo = mid
    return hi * rho, hi
