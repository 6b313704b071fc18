"""Scheduling policies: MaxWeight and the comparison policies.

A policy picks one service vector per slot. Index -1 means the server idles.
"""

import logging
from typing import Optional, Protocol, Sequence, Union

import numpy as np

from ..config import settings
from ..core.errors import SpecValidationError
from ..core.geometry import argmax_set, maxweight_scores
from ..core.model import ServiceSet, WeightMatrix, WorkloadVector, check_dimension

logger = logging.getLogger(__name__)

IDLE = -1


class Policy(Protocol):
    """Scheduler interface used by the engine."""

    name: str

    def reset(self) -> None:
        """Restore the initial state (PRNG position) so a run can be repeated."""
        ...

    def select(self, x: np.ndarray, t: int) -> int:
        """Service vector index for slot t at workload x, or IDLE."""
        ...


def maxweight_select(
    x: Union[WorkloadVector, np.ndarray],
    d: WeightMatrix,
    service_set: ServiceSet,
    tau_eq: Optional[float] = None,
) -> int:
    """Index maximizing <S_m, D x>; ties go to the lowest index."""
    x = np.asarray(x.x if isinstance(x, WorkloadVector) else x, dtype=np.float64)
    check_dimension("workload", x.size, service_set.q)
    check_dimension("weight diagonal", d.dim, service_set.q)
    return argmax_set(maxweight_scores(x, d.d, service_set.matrix), tau_eq)[0]


class MaxWeight:
    """MaxWeight with diagonal weights D."""

    name = "maxweight"

    def __init__(self, d: WeightMatrix, service_set: ServiceSet, tau_eq: Optional[float] = None):
        check_dimension("weight diagonal", d.dim, service_set.q)
        self.d = d
        self.service_set = service_set
        self.tau_eq = settings.tau_eq if tau_eq is None else tau_eq
        self._matrix = service_set.matrix
        self._weights = d.d

    def reset(self) -> None:
        pass

    def select(self, x: np.ndarray, t: int) -> int:
        scores = self._matrix @ (self._weights * x)
        best = scores.max()
        if best == 0.0:
            return 0
        return int(np.flatnonzero(scores >= best - self.tau_eq * np.abs(scores).max())[0])


class StationaryMixture:
    """Picks S_m with probability beta_m independently of the workload.

    Weights may sum to less than 1; the remaining probability idles the server.
    Draws are taken from a PCG64 generator in blocks.
    """

    name = "stationary_mixture"
    _BLOCK = 4096

    def __init__(self, beta: Sequence[float], seed: int = settings.default_seed):
        beta = np.asarray(beta, dtype=np.float64)
        if beta.ndim != 1 or np.any(beta < 0) or not np.all(np.isfinite(beta)):
            raise SpecValidationError(f"mixture weights must be finite and >= 0: {beta.tolist()}")
        if beta.sum() > 1.0 + 1e-9:
            raise SpecValidationError(f"mixture weights must sum to <= 1 (got {beta.sum():.12g})")
        self.beta = beta
        self.seed = int(seed)
        idle = max(0.0, 1.0 - float(beta.sum()))
        probs = np.append(beta, idle)
        self._probs = probs / probs.sum()
        self.reset()

    def reset(self) -> None:
        self._rng = np.random.Generator(np.random.PCG64(self.seed))
        self._block = np.empty(0, dtype=np.int64)
        self._pos = 0

    def select(self, x: np.ndarray, t: int) -> int:
        if self._pos >= self._block.size:
            self._block = self._rng.choice(self._probs.size, size=self._BLOCK, p=self._probs)
            self._pos = 0
        choice = int(self._block[self._pos])
        self._pos += 1
        return IDLE if choice == self.beta.size else choice


class Fixed:
    """Always uses the same service vector."""

    name = "fixed"

    def __init__(self, index: int, service_set: ServiceSet):
        if not 0 <= index < service_set.n:
            raise SpecValidationError(f"service index {index} out of range for N={service_set.n}")
        self.index = int(index)

    def reset(self) -> None:
        pass

    def select(self, x: np.ndarray, t: int) -> int:
        return self.index
