"""Experiment configuration schema.

Configs are single JSON documents. Vectors are arrays whose entries are numbers or rational
strings such as ``"13/8"``; rationals are parsed exactly with ``fractions.Fraction`` and
converted to float once.
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..config import settings
from ..core.errors import ConfigError
from ..core.model import (
    FairnessTarget,
    LoadVector,
    ServiceSet,
    SystemSpec,
    WeightMatrix,
    validate_system,
)
from ..sim.arrivals import ArrivalModel

logger = logging.getLogger(__name__)

Scalar = Union[int, float, str]


def parse_rational(value: Any) -> float:
    """Number or rational string to float."""
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not a number or rational: {value!r}") from e
    raise ValueError(f"not a number or rational: {value!r}")


def _vector(values: Any) -> List[float]:
    if not isinstance(values, (list, tuple)):
        raise ValueError("expected an array")
    return [parse_rational(v) for v in values]


def _matrix(rows: Any) -> List[List[float]]:
    if not isinstance(rows, (list, tuple)):
        raise ValueError("expected an array of arrays")
    return [_vector(r) for r in rows]


class SystemConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    service_vectors: List[List[float]]
    rho: List[float]

    @field_validator("service_vectors", mode="before")
    @classmethod
    def _rows(cls, v):
        return _matrix(v)

    @field_validator("rho", mode="before")
    @classmethod
    def _rho(cls, v):
        return _vector(v)


class ArrivalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform", "deterministic", "trace", "mode_switch"] = "uniform"
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    integer: bool = False
    trace_path: Optional[str] = None
    stable_rho: Optional[List[float]] = None
    unstable_rho: Optional[List[float]] = None
    period: int = Field(default=settings.mode_period, ge=1)
    start_stable: bool = True

    @field_validator("stable_rho", "unstable_rho", mode="before")
    @classmethod
    def _rates(cls, v):
        return None if v is None else _vector(v)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str = "out"
    stride: int = Field(default=settings.stride, ge=1)
    name: str = "run"


class ExperimentConfig(BaseModel):
    """Resolved experiment configuration."""

    model_config = ConfigDict(extra="forbid")

    system: SystemConfig
    theta: Optional[List[float]] = None
    d: Optional[List[float]] = None
    arrivals: ArrivalConfig = Field(default_factory=ArrivalConfig)
    horizon: int = Field(default=100_000, ge=1)
    initial_workloads: List[List[float]] = Field(default_factory=list)
    output: OutputConfig = Field(default_factory=OutputConfig)
    tail_fraction: float = Field(default=settings.tail_fraction, gt=0.0, lt=1.0)
    oracle_res: Optional[int] = Field(default=None, ge=1)

    @field_validator("theta", "d", mode="before")
    @classmethod
    def _optional_vector(cls, v):
        return None if v is None else _vector(v)

    @field_validator("initial_workloads", mode="before")
    @classmethod
    def _workloads(cls, v):
        return _matrix(v)

    @model_validator(mode="after")
    def _arrival_rates(self):
        if self.arrivals.kind == "mode_switch":
            if self.arrivals.stable_rho is None:
                raise ValueError("mode_switch arrivals need stable_rho")
            if self.arrivals.unstable_rho is None:
                self.arrivals.unstable_rho = list(self.system.rho)
        return self

    def service_set(self) -> ServiceSet:
        return ServiceSet.from_rows(self.system.service_vectors)

    def target(self) -> FairnessTarget:
        if self.theta is None:
            raise ConfigError("config has no theta")
        return FairnessTarget.from_weights(self.theta)

    def weights(self) -> Optional[WeightMatrix]:
        return None if self.d is None else WeightMatrix(self.d)

    def system_spec(self, d: Optional[WeightMatrix] = None) -> SystemSpec:
        """System with the given D, else the config's D, else identity."""
        service_set = self.service_set()
        if d is None:
            d = self.weights() or WeightMatrix.identity(service_set.q)
        return validate_system(service_set, LoadVector(self.system.rho), d)

    def arrival_model(self, seed: Optional[int] = None) -> ArrivalModel:
        a = self.arrivals
        if seed is None:
            seed = a.seed if a.seed is not None else settings.default_seed
        return ArrivalModel(
            kind=a.kind,
            seed=seed,
            integer=a.integer,
            trace_path=a.trace_path,
            stable_rho=None if a.stable_rho is None else np.array(a.stable_rho),
            unstable_rho=None if a.unstable_rho is None else np.array(a.unstable_rho),
            period=a.period,
            start_stable=a.start_stable,
        )

    def workloads(self) -> List[np.ndarray]:
        """Initial workloads; a single empty system when none are given."""
        if not self.initial_workloads:
            return [np.zeros(len(self.system.rho))]
        return [np.array(x) for x in self.initial_workloads]


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate an experiment config.

    Raises:
        ConfigError: If the file cannot be read or does not match the schema
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        config = ExperimentConfig.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"config {path} failed validation:\n{e}") from e
    logger.debug(f"Loaded config {path}")
    return config
