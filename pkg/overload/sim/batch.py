"""Concurrent batch runs.

Each job owns its policy and arrival model (and with them its PRNG state); jobs share only
immutable system specs. Runs execute in worker threads, at most ``batch_workers`` at a time.
"""

import asyncio
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .arrivals import ArrivalModel
from .engine import SimTrace, run
from .policies import Policy
from ..config import settings
from ..core.model import SystemSpec, WorkloadVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimJob:
    name: str
    spec: SystemSpec
    policy: Policy
    arrivals: ArrivalModel
    horizon: int
    x0: Union[WorkloadVector, np.ndarray, None] = None
    stride: Optional[int] = None


async def run_batch(jobs: Sequence[SimJob], workers: Optional[int] = None) -> List[SimTrace]:
    """Run all jobs concurrently and return their traces in job order."""
    workers = settings.batch_workers if workers is None else workers
    semaphore = asyncio.Semaphore(max(1, workers))

    async def _run(job: SimJob) -> SimTrace:
        async with semaphore:
            logger.info(f"Starting run {job.name} ({job.horizon} slots)")
            try:
                trace = await asyncio.to_thread(
                    run, job.spec, job.policy, job.arrivals, job.horizon, job.x0, job.stride
                )
            except Exception as e:
                logger.error(f"Run {job.name} failed: {e}")
                raise
            return trace

    traces = await asyncio.gather(*(_run(job) for job in jobs))
    logger.info(f"Batch of {len(jobs)} runs complete")
    return list(traces)
