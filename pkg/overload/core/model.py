"""Domain types shared by geometry, solver, controller and simulator.

Every type validates its invariants at construction and stores its numbers as read-only
float64 arrays, so instances are immutable values that can be shared across workers.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError, SpecValidationError

logger = logging.getLogger(__name__)

# Sum-to-one tolerance for fairness targets after normalization
THETA_SUM_TOL = 1e-12
# Deviation above which a theta renormalization is reported
THETA_WARN_TOL = 1e-9


def as_vector(values: Iterable[float], name: str) -> np.ndarray:
    """Convert ``values`` to a read-only, finite, one-dimensional float64 array."""
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1 or arr.size == 0:
        raise SpecValidationError(f"{name} must be a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecValidationError(f"{name} must be finite: {arr.tolist()}")
    arr.setflags(write=False)
    return arr


def _freeze(obj, field: str, value: np.ndarray):
    object.__setattr__(obj, field, value)


@dataclass(frozen=True, eq=False)
class ServiceVector:
    """Jobs removable per slot from each queue when this configuration is used."""

    s: np.ndarray

    def __post_init__(self):
        s = as_vector(self.s, "service vector")
        if np.any(s < 0):
            raise SpecValidationError(f"service vector has negative entries: {s.tolist()}")
        if not np.any(s > 0):
            raise SpecValidationError("service vector must have at least one positive entry")
        _freeze(self, "s", s)

    @property
    def dim(self) -> int:
        return int(self.s.size)


@dataclass(frozen=True, eq=False)
class ServiceSet:
    """Ordered set of N service vectors sharing dimension Q."""

    vectors: Tuple[ServiceVector, ...]

    def __post_init__(self):
        vectors = tuple(
            v if isinstance(v, ServiceVector) else ServiceVector(v) for v in self.vectors
        )
        if not vectors:
            raise SpecValidationError("service set must contain at least one vector")
        dims = {v.dim for v in vectors}
        if len(dims) != 1:
            raise DimensionMismatchError(f"service vectors have mixed dimensions: {sorted(dims)}")
        seen = set()
        for i, v in enumerate(vectors):
            key = (v.s + 0.0).tobytes()
            if key in seen:
                raise SpecValidationError(f"duplicate service vector at index {i}: {v.s.tolist()}")
            seen.add(key)
        _freeze(self, "vectors", vectors)
        matrix = np.vstack([v.s for v in vectors])
        matrix.setflags(write=False)
        object.__setattr__(self, "_matrix", matrix)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "ServiceSet":
        return cls(tuple(ServiceVector(r) for r in rows))

    @property
    def matrix(self) -> np.ndarray:
        """N x Q array; row m is S_m."""
        return self._matrix  # type: ignore[attr-defined]

    @property
    def n(self) -> int:
        return len(self.vectors)

    @property
    def q(self) -> int:
        return self.vectors[0].dim

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True, eq=False)
class LoadVector:
    """Mean arrivals per slot; every entry strictly positive and finite."""

    rho: np.ndarray

    def __post_init__(self):
        rho = as_vector(self.rho, "load vector")
        if np.any(rho <= 0):
            raise SpecValidationError(f"load vector entries must be > 0: {rho.tolist()}")
        _freeze(self, "rho", rho)

    @property
    def dim(self) -> int:
        return int(self.rho.size)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Diagonal of the MaxWeight matrix D (positive definite)."""

    d: np.ndarray

    def __post_init__(self):
        d = as_vector(self.d, "weight diagonal")
        if np.any(d <= 0):
            raise SpecValidationError(f"weight diagonal entries must be > 0: {d.tolist()}")
        _freeze(self, "d", d)

    @classmethod
    def identity(cls, q: int) -> "WeightMatrix":
        return cls(np.ones(q))

    @property
    def dim(self) -> int:
        return int(self.d.size)

    def scaled(self, c: float) -> "WeightMatrix":
        return WeightMatrix(self.d * c)

    def display(self) -> np.ndarray:
        """Diagonal divided by its smallest entry (diag(1, 2) style)."""
        return self.d / self.d.min()

    def equivalent(self, other: "WeightMatrix", rtol: float = 1e-9) -> bool:
        """True if both matrices are equal up to a positive scalar."""
        if self.dim != other.dim:
            return False
        return bool(np.allclose(self.display(), other.display(), rtol=rtol, atol=0.0))


@dataclass(frozen=True, eq=False)
class FairnessTarget:
    """Target share of aggregate backlog per queue."""

    theta: np.ndarray

    def __post_init__(self):
        theta = as_vector(self.theta, "fairness target")
        if np.any(theta < 0):
            raise SpecValidationError(f"fairness target entries must be >= 0: {theta.tolist()}")
        if abs(theta.sum() - 1.0) > THETA_SUM_TOL:
            raise SpecValidationError(
                f"fairness target must sum to 1 (got {theta.sum():.15g}); "
                "use FairnessTarget.from_weights to normalize"
            )
        _freeze(self, "theta", theta)

    @classmethod
    def from_weights(cls, values: Iterable[float]) -> "FairnessTarget":
        """Normalize non-negative weights to a target, warning on visible rescaling."""
        raw = as_vector(values, "fairness target")
        total = raw.sum()
        if np.any(raw < 0) or total <= 0:
            raise SpecValidationError(f"fairness weights must be >= 0 with positive sum: {raw.tolist()}")
        if abs(total - 1.0) > THETA_WARN_TOL:
            logger.warning(f"Fairness target sums to {total:.12g}; normalizing")
        return cls(raw / total)

    @property
    def dim(self) -> int:
        return int(self.theta.size)

    @property
    def support(self) -> np.ndarray:
        return self.theta > 0


@dataclass(frozen=True, eq=False)
class WorkloadVector:
    """Backlog X(t) at slot t."""

    x: np.ndarray
    t: int = 0

    def __post_init__(self):
        x = as_vector(self.x, "workload")
        if np.any(x < 0):
            raise SpecValidationError(f"workload entries must be >= 0: {x.tolist()}")
        if self.t < 0:
            raise SpecValidationError(f"slot index must be >= 0, got {self.t}")
        _freeze(self, "x", x)

    @property
    def dim(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True, eq=False)
class MixtureWeights:
    """Weights alpha over the service vectors (sub-convex combination)."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = as_vector(self.alpha, "mixture weights")
        if np.any(alpha < -1e-12):
            raise SpecValidationError(f"mixture weights must be >= 0: {alpha.tolist()}")
        if alpha.sum() > 1.0 + 1e-9:
            raise SpecValidationError(f"mixture weights must sum to <= 1 (got {alpha.sum():.12g})")
        alpha = np.clip(alpha, 0.0, None)
        alpha.setflags(write=False)
        _freeze(self, "alpha", alpha)

    @property
    def total(self) -> float:
        return float(self.alpha.sum())


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Service set, load and MaxWeight weights with a common dimension Q."""

    service_set: ServiceSet
    rho: LoadVector
    d: WeightMatrix

    @property
    def q(self) -> int:
        return self.service_set.q

    @property
    def n(self) -> int:
        return self.service_set.n


def validate_system(service_set: ServiceSet, rho: LoadVector, d: WeightMatrix) -> SystemSpec:
    """Check that all parts agree on Q and bundle them.

    Raises:
        DimensionMismatchError: If the service vectors, load and weights disagree on Q
    """
    q = service_set.q
    if rho.dim != q:
        raise DimensionMismatchError(f"load vector has {rho.dim} queues, service vectors have {q}")
    if d.dim != q:
        raise DimensionMismatchError(f"weight diagonal has {d.dim} entries, service vectors have {q}")
    return SystemSpec(service_set=service_set, rho=rho, d=d)


def build_system(
    service_vectors: Sequence[Sequence[float]],
    rho: Sequence[float],
    d: Optional[Sequence[float]] = None,
) -> SystemSpec:
    """Construct and validate a system from plain sequences (D defaults to identity)."""
    service_set = ServiceSet.from_rows(service_vectors)
    load = LoadVector(rho)
    weights = WeightMatrix(d) if d is not None else WeightMatrix.identity(service_set.q)
    return validate_system(service_set, load, weights)


def check_dimension(name: str, dim: int, q: int):
    """Raise DimensionMismatchError unless ``dim == q``."""
    if dim != q:
        raise DimensionMismatchError(f"{name} has {dim} entries, expected {q}")
