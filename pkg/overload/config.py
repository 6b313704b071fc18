"""Configuration management."""

import os
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    """Numerical and runtime settings.

    Every field can be overridden from the environment with the ``OVERLOAD_`` prefix
    (``OVERLOAD_TAU_FIX=1e-10``).
    """

    model_config = SettingsConfigDict(env_prefix="OVERLOAD_")

    # Logging
    log_level: str = os.getenv("LOG_LEVEL", "INFO")

    # Tolerances
    tau_eq: float = 1e-9
    tau_fix: float = 1e-8
    lp_tol: float = 1e-9

    # Growth-ray solver
    eta_max_iter: int = 100_000
    eta_polish_every: int = 25

    # Enumeration / oracle limits
    max_vectors: int = 16
    oracle_budget: float = 2e8

    # Feasibility LPs
    alpha_min: float = 1e-6
    c_min: float = 1e-9
    direction_tol: float = 2e-2

    # Simulation
    tail_fraction: float = 0.2
    stable_rate: float = 0.02
    mode_period: int = 500
    stride: int = 100
    default_seed: int = 2024
    batch_workers: int = 4

    # Observability
    metrics_path: Optional[str] = os.getenv("METRICS_PATH")


settings = Settings()
