"""Arrival models.

All random draws come from numpy's PCG64 generator seeded with the model's 64-bit seed, so
a (model, horizon) pair always produces the same arrival matrix on every platform.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..config import settings
from ..core.errors import ConfigError, PreconditionError, SpecValidationError
from ..core.model import as_vector, check_dimension

logger = logging.getLogger(__name__)

ARRIVAL_KINDS = ("uniform", "deterministic", "trace", "mode_switch")


@dataclass(frozen=True)
class ModeWindow:
    """Slots [start, end) spent in one mode."""

    index: int
    start: int
    end: int
    stable: bool


@dataclass(frozen=True, eq=False)
class ArrivalModel:
    """How A(t) is generated.

    Kinds:
        uniform: A_q(t) uniform on [0, 2 rho_q] (integers 0..2 rho_q with ``integer``)
        deterministic: A(t) = rho every slot
        trace: rows of a CSV file with header ``t,a_1,...,a_Q``
        mode_switch: uniform arrivals alternating between ``stable_rho`` and
            ``unstable_rho`` every ``period`` slots

    ``rates`` may be left unset for uniform and deterministic arrivals; the system load is
    used then.
    """

    kind: str = "uniform"
    seed: int = settings.default_seed
    rates: Optional[np.ndarray] = None
    integer: bool = False
    trace_path: Optional[str] = None
    stable_rho: Optional[np.ndarray] = None
    unstable_rho: Optional[np.ndarray] = None
    period: int = settings.mode_period
    start_stable: bool = True

    def __post_init__(self):
        if self.kind not in ARRIVAL_KINDS:
            raise SpecValidationError(f"unknown arrival kind {self.kind!r}; expected one of {ARRIVAL_KINDS}")
        if not 0 <= int(self.seed) < 2**64:
            raise SpecValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for name in ("rates", "stable_rho", "unstable_rho"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = as_vector(value, name)
            if np.any(arr < 0):
                raise SpecValidationError(f"{name} must be non-negative: {arr.tolist()}")
            object.__setattr__(self, name, arr)
        if self.kind == "trace" and not self.trace_path:
            raise SpecValidationError("trace arrivals need a trace_path")
        if self.kind == "mode_switch":
            if self.stable_rho is None or self.unstable_rho is None:
                raise SpecValidationError("mode_switch arrivals need stable_rho and unstable_rho")
            if self.stable_rho.size != self.unstable_rho.size:
                raise SpecValidationError("stable_rho and unstable_rho differ in length")
            if self.period < 1:
                raise SpecValidationError(f"mode period must be >= 1, got {self.period}")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(int(self.seed)))

    def stable_at(self, t: int) -> bool:
        """Mode of slot t for mode_switch arrivals."""
        first = (t // self.period) % 2 == 0
        return first if self.start_stable else not first

    def windows(self, horizon: int) -> List[ModeWindow]:
        """Mode windows covering [0, horizon)."""
        if self.kind != "mode_switch":
            return [ModeWindow(index=0, start=0, end=horizon, stable=False)]
        return [
            ModeWindow(index=i, start=start, end=min(start + self.period, horizon), stable=self.stable_at(start))
            for i, start in enumerate(range(0, horizon, self.period))
        ]

    def generate(self, horizon: int, default_rates: Optional[np.ndarray] = None) -> np.ndarray:
        """Arrival matrix of shape (horizon, Q); row t is A(t)."""
        if horizon < 1:
            raise PreconditionError(f"horizon must be >= 1, got {horizon}")
        if self.kind == "trace":
            return self._from_trace(horizon, default_rates)
        if self.kind == "mode_switch":
            stable = np.array([self.stable_at(t) for t in range(horizon)])
            upper = np.where(stable[:, None], 2.0 * self.stable_rho, 2.0 * self.unstable_rho)
            return self._uniform(upper)

        rates = self.rates if self.rates is not None else default_rates
        if rates is None:
            raise PreconditionError(f"{self.kind} arrivals need rates")
        rates = np.asarray(rates, dtype=np.float64)
        if self.kind == "deterministic":
            return np.tile(rates, (horizon, 1))
        return self._uniform(np.tile(2.0 * rates, (horizon, 1)))

    def _uniform(self, upper: np.ndarray) -> np.ndarray:
        rng = self.generator()
        if not self.integer:
            return rng.random(upper.shape) * upper
        if not np.allclose(upper, np.round(upper)):
            raise SpecValidationError("integer arrivals need 2*rho to be integral")
        return rng.integers(0, np.round(upper).astype(np.int64) + 1).astype(np.float64)

    def _from_trace(self, horizon: int, default_rates: Optional[np.ndarray]) -> np.ndarray:
        path = Path(self.trace_path)  # type: ignore[arg-type]
        try:
            with path.open() as fh:
                header = fh.readline().strip().split(",")
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read arrival trace {path}: {e}") from e
        if header[0] != "t" or any(h != f"a_{i + 1}" for i, h in enumerate(header[1:])):
            raise ConfigError(f"arrival trace header must be t,a_1,...,a_Q, got {','.join(header)}")
        arrivals = data[:, 1:]
        if default_rates is not None:
            check_dimension("arrival trace", arrivals.shape[1], len(default_rates))
        if arrivals.shape[0] < horizon:
            raise PreconditionError(f"arrival trace has {arrivals.shape[0]} rows, horizon is {horizon}")
        if np.any(arrivals < 0) or not np.all(np.isfinite(arrivals)):
            raise ConfigError("arrival trace contains negative or non-finite values")
        logger.debug(f"Loaded {arrivals.shape[0]} arrival rows from {path}")
        return np.ascontiguousarray(arrivals[:horizon], dtype=np.float64)


def mean_rates(arrivals: np.ndarray) -> np.ndarray:
    """Empirical per-queue arrival rate."""
    return arrivals.mean(axis=0)

