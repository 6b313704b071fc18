"""Simulation engine.

A run is a strictly sequential chain of ``step`` calls. Arrivals are generated up front
from the arrival model's seed and stored in the trace, which makes every run replayable.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from . import policies
from .arrivals import ArrivalModel
from .policies import IDLE, Policy
from ..config import settings
from ..core import metrics
from ..core.errors import PreconditionError, SpecValidationError
from ..core.model import SystemSpec, WorkloadVector, check_dimension

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimTrace:
    """Full record of a run.

    Attributes:
        x: Workloads X(0..T), shape (T+1, Q)
        chosen: Service index used in slot t (IDLE when the server idled), shape (T,)
        departures: D(t), shape (T, Q)
        arrivals: A(t), shape (T, Q)
        policy: Policy name
        config: Echo of the run configuration
        stride: Downsampling stride for exported series
    """

    x: np.ndarray
    chosen: np.ndarray
    departures: np.ndarray
    arrivals: np.ndarray
    policy: str
    config: Dict[str, Any] = field(default_factory=dict)
    stride: int = settings.stride

    @property
    def horizon(self) -> int:
        return int(self.chosen.size)

    @property
    def q(self) -> int:
        return int(self.x.shape[1])

    def scaled(self) -> np.ndarray:
        """X(t)/t, with row 0 set to zero."""
        t = np.arange(self.x.shape[0], dtype=np.float64)
        out = np.zeros_like(self.x)
        out[1:] = self.x[1:] / t[1:, None]
        return out

    def ratios(self) -> np.ndarray:
        """X_q(t) / sum_k X_k(t); NaN where the system is empty."""
        total = self.x.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, self.x / np.where(total > 0, total, 1.0), np.nan)

    def sample_slots(self, stride: Optional[int] = None) -> np.ndarray:
        """Slots kept when exporting with the given stride (always includes T)."""
        stride = self.stride if stride is None else stride
        if stride < 1:
            raise SpecValidationError(f"stride must be >= 1, got {stride}")
        slots = np.arange(0, self.horizon + 1, stride)
        if slots[-1] != self.horizon:
            slots = np.append(slots, self.horizon)
        return slots


def step(
    x: np.ndarray,
    a: np.ndarray,
    service: Optional[np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    """Advance one slot: x' = x + a - min(S, x).

    Args:
        x: Current workload
        a: Arrivals of this slot
        service: Chosen service vector, or None when idling

    Returns:
        (next workload, departures)
    """
    if service is None:
        departures = np.zeros_like(x)
    else:
        departures = np.minimum(service, x)
    return x + a - departures, departures


def _initial(x0: Union[WorkloadVector, np.ndarray, None], q: int) -> np.ndarray:
    if x0 is None:
        return np.zeros(q)
    x0 = x0 if isinstance(x0, WorkloadVector) else WorkloadVector(x0)
    check_dimension("initial workload", x0.dim, q)
    return np.array(x0.x, dtype=np.float64)


def run(
    spec: SystemSpec,
    policy: Policy,
    arrivals: ArrivalModel,
    horizon: int,
    x0: Union[WorkloadVector, np.ndarray, None] = None,
    stride: Optional[int] = None,
) -> SimTrace:
    """Simulate ``horizon`` slots of the workload recursion under ``policy``.

    Deterministic given the arrival seed and the policy's seed.
    """
    if horizon < 1:
        raise PreconditionError(f"horizon must be >= 1, got {horizon}")
    stride = settings.stride if stride is None else stride
    q = spec.q
    matrix = spec.service_set.matrix
    if isinstance(policy, policies.StationaryMixture):
        check_dimension("mixture weights", policy.beta.size, spec.n)

    arr = arrivals.generate(horizon, spec.rho.rho)
    check_dimension("arrival vector", arr.shape[1], q)

    xs = np.empty((horizon + 1, q))
    deps = np.empty((horizon, q))
    chosen = np.empty(horizon, dtype=np.int64)
    xs[0] = _initial(x0, q)

    policy.reset()
    metrics.active_runs.inc()
    started = time.perf_counter()
    try:
        x = xs[0]
        for t in range(horizon):
            m = policy.select(x, t)
            x, deps[t] = step(x, arr[t], None if m == IDLE else matrix[m])
            xs[t + 1] = x
            chosen[t] = m
    finally:
        metrics.active_runs.dec()

    elapsed = time.perf_counter() - started
    metrics.sim_runs.labels(policy=policy.name).inc()
    metrics.sim_slots.labels(policy=policy.name).inc(horizon)
    metrics.sim_run_duration.labels(policy=policy.name).observe(elapsed)
    logger.info(f"Simulated {horizon} slots under {policy.name} in {elapsed:.2f}s")

    for a in (xs, deps, chosen, arr):
        a.setflags(write=False)
    config = {
        "policy": policy.name,
        "horizon": horizon,
        "seed": int(arrivals.seed),
        "arrival_kind": arrivals.kind,
        "x0": xs[0].tolist(),
        "service_vectors": matrix.tolist(),
        "rho": spec.rho.rho.tolist(),
        "d": spec.d.d.tolist(),
    }
    return SimTrace(
        x=xs,
        chosen=chosen,
        departures=deps,
        arrivals=arr,
        policy=policy.name,
        config=config,
        stride=stride,
    )


def replay(trace: SimTrace, spec: SystemSpec, policy: Optional[Policy] = None) -> bool:
    """Re-run the recorded arrivals and choices through ``step``.

    Returns True when every workload and departure is reproduced bit-identically. With a
    policy, its choices must also match the recorded ones.
    """
    matrix = spec.service_set.matrix
    check_dimension("trace", trace.q, spec.q)
    if policy is not None:
        policy.reset()
    x = np.array(trace.x[0])
    for t in range(trace.horizon):
        m = int(trace.chosen[t])
        if policy is not None and policy.select(x, t) != m:
            logger.warning(f"Replay diverged at slot {t}: policy chose differently")
            return False
        x, deps = step(x, trace.arrivals[t], None if m == IDLE else matrix[m])
        if not (np.array_equal(x, trace.x[t + 1]) and np.array_equal(deps, trace.departures[t])):
            logger.warning(f"Replay diverged at slot {t}")
            return False
    return True
