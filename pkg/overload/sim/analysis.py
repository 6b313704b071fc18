"""Convergence and fairness measurements on simulation traces."""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .arrivals import ArrivalModel
from .engine import SimTrace, run
from .policies import MaxWeight, StationaryMixture
from ..config import settings
from ..core.errors import PreconditionError
from ..core.eta import solve_eta
from ..core.model import FairnessTarget, SystemSpec, WeightMatrix, WorkloadVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DirectionEstimate:
    """Tail-averaged growth estimate of a run.

    ``stable`` means the backlog is empty throughout the tail window; ``theta_hat`` is None
    then. ``growing`` is set when some queue's tail growth rate exceeds ``stable_rate``.
    """

    eta_hat: np.ndarray
    theta_hat: Optional[np.ndarray]
    stable: bool
    tail_start: int
    growing: bool = True


@dataclass(frozen=True)
class WindowSummary:
    index: int
    start: int
    end: int
    stable: bool
    theta_hat: Optional[np.ndarray]
    final_total: float


@dataclass(frozen=True)
class MinimalityEntry:
    beta: np.ndarray
    eta_bar: np.ndarray
    qualifying: bool
    eta_hat: Optional[np.ndarray] = None
    kappa: Optional[float] = None
    kappa_analytic: Optional[float] = None


@dataclass(frozen=True)
class MinimalityReport:
    maxweight_eta_hat: np.ndarray
    maxweight_eta: np.ndarray
    entries: List[MinimalityEntry]
    tolerance: float

    @property
    def qualifying(self) -> List[MinimalityEntry]:
        return [e for e in self.entries if e.qualifying]

    @property
    def ok(self) -> bool:
        return all(e.kappa is not None and e.kappa >= 1.0 - self.tolerance for e in self.qualifying)


def measure_direction(
    trace: SimTrace,
    tail_fraction: Optional[float] = None,
    stable_rate: Optional[float] = None,
) -> DirectionEstimate:
    """Average X(t)/t and the backlog ratios over the last ``tail_fraction`` of the run.

    A run whose tail backlog is empty (up to float noise) is flagged stable and gets no
    direction. Slow growth does not suppress the direction; it only clears ``growing``.
    """
    tail_fraction = settings.tail_fraction if tail_fraction is None else tail_fraction
    stable_rate = settings.stable_rate if stable_rate is None else stable_rate
    if not 0.0 < tail_fraction < 1.0:
        raise PreconditionError(f"tail_fraction must lie in (0, 1), got {tail_fraction}")
    horizon = trace.horizon
    start = max(1, horizon - math.ceil(tail_fraction * horizon))

    eta_hat = trace.scaled()[start:].mean(axis=0)
    tail = trace.x[start:]
    totals = tail.sum(axis=1)
    noise = settings.tau_eq * max(1.0, float(np.abs(trace.arrivals).max(initial=0.0)))
    occupied = totals > noise
    stable = not occupied.any()
    theta_hat = None if stable else (tail[occupied] / totals[occupied, None]).mean(axis=0)
    growing = bool(eta_hat.max() > stable_rate)
    if stable:
        logger.info("Backlog is empty over the tail window; no direction to measure")
    elif not growing:
        logger.info(f"Backlog stays bounded over the tail window (eta_hat={np.round(eta_hat, 6).tolist()})")
    return DirectionEstimate(
        eta_hat=eta_hat, theta_hat=theta_hat, stable=stable, tail_start=start, growing=growing
    )


def window_summaries(trace: SimTrace, arrivals: ArrivalModel) -> List[WindowSummary]:
    """Per mode window: mean backlog ratios over its final quarter and its final total backlog."""
    ratios = trace.ratios()
    totals = trace.x.sum(axis=1)
    summaries = []
    for w in arrivals.windows(trace.horizon):
        first = w.end - max(1, (w.end - w.start) // 4)
        tail = ratios[first + 1 : w.end + 1]
        occupied = tail[~np.isnan(tail).any(axis=1)]
        summaries.append(
            WindowSummary(
                index=w.index,
                start=w.start,
                end=w.end,
                stable=w.stable,
                theta_hat=occupied.mean(axis=0) if occupied.size else None,
                final_total=float(totals[w.end]),
            )
        )
    return summaries


def compare_minimality(
    spec: SystemSpec,
    theta: Union[FairnessTarget, Sequence[float]],
    d_star: WeightMatrix,
    alternatives: Sequence[Sequence[float]],
    horizon: int,
    arrivals: Optional[ArrivalModel] = None,
    x0: Union[WorkloadVector, np.ndarray, None] = None,
    direction_tol: Optional[float] = None,
    tolerance: float = 0.03,
) -> MinimalityReport:
    """Compare MaxWeight(d_star) with stationary mixtures that grow along theta.

    An alternative beta qualifies when (rho - sum beta_m S_m)^+ normalizes to theta within
    ``direction_tol``. Each qualifying alternative is simulated on the same arrivals and
    kappa = sum(eta_hat_alt) / sum(eta_hat_maxweight) is reported; MaxWeight is minimal
    when every kappa is at least 1 - tolerance.
    """
    direction_tol = settings.direction_tol if direction_tol is None else direction_tol
    target = theta if isinstance(theta, FairnessTarget) else FairnessTarget.from_weights(theta)
    arrivals = arrivals or ArrivalModel()
    rho = spec.rho.rho
    matrix = spec.service_set.matrix

    solution = solve_eta(rho, spec.service_set, d_star)
    if solution.stable:
        raise PreconditionError("minimality comparison needs an overloaded system")
    mw_eta = solution.eta
    mw_trace = run(spec, MaxWeight(d_star, spec.service_set), arrivals, horizon, x0)
    mw_hat = measure_direction(mw_trace).eta_hat

    entries = []
    for beta in alternatives:
        beta = np.asarray(beta, dtype=np.float64)
        eta_bar = np.clip(rho - beta @ matrix, 0.0, None)
        total = eta_bar.sum()
        if total <= 0 or np.abs(eta_bar / total - target.theta).max() > direction_tol:
            logger.warning(f"Alternative {beta.tolist()} does not grow along theta; skipped")
            entries.append(MinimalityEntry(beta=beta, eta_bar=eta_bar, qualifying=False))
            continue
        alt_trace = run(spec, StationaryMixture(beta, seed=arrivals.seed + 1), arrivals, horizon, x0)
        alt_hat = measure_direction(alt_trace).eta_hat
        entries.append(
            MinimalityEntry(
                beta=beta,
                eta_bar=eta_bar,
                qualifying=True,
                eta_hat=alt_hat,
                kappa=float(alt_hat.sum() / mw_hat.sum()),
                kappa_analytic=float(total / mw_eta.sum()),
            )
        )

    report = MinimalityReport(
        maxweight_eta_hat=mw_hat, maxweight_eta=np.array(mw_eta), entries=entries, tolerance=tolerance
    )
    if not report.qualifying:
        logger.warning("No alternative grows along theta; comparison is empty")
    elif not report.ok:
        logger.warning(f"Minimality violated: kappas {[e.kappa for e in report.qualifying]}")
    return report
