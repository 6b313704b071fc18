"""Tests for concurrent batch runs."""

import numpy as np
import pytest

from overload.core.model import build_system
from overload.sim.arrivals import ArrivalModel
from overload.sim.batch import SimJob, run_batch
from overload.sim.engine import run
from overload.sim.policies import MaxWeight, StationaryMixture


@pytest.fixture
def spec():
    return build_system([[4, 0], [3, 1]], [4, 1], [1, 2])


@pytest.mark.asyncio
async def test_batch_matches_sequential_runs(spec):
    """Test that concurrent runs return in job order and equal their sequential counterparts."""
    jobs = [
        SimJob(
            name=f"seed-{seed}",
            spec=spec,
            policy=MaxWeight(spec.d, spec.service_set),
            arrivals=ArrivalModel(seed=seed),
            horizon=3000,
        )
        for seed in range(10)
    ]
    traces = await run_batch(jobs, workers=3)
    assert len(traces) == len(jobs)
    for job, trace in zip(jobs, traces):
        expected = run(spec, MaxWeight(spec.d, spec.service_set), ArrivalModel(seed=job.arrivals.seed), 3000)
        np.testing.assert_array_equal(trace.x, expected.x)
        np.testing.assert_array_equal(trace.chosen, expected.chosen)
        assert trace.config["seed"] == job.arrivals.seed


@pytest.mark.asyncio
async def test_batch_mixture_policies_are_independent(spec):
    """Test that mixture runs with their own seeds do not share PRNG state."""
    jobs = [
        SimJob(
            name=f"mix-{i}",
            spec=spec,
            policy=StationaryMixture([0.4, 0.4], seed=99),
            arrivals=ArrivalModel(seed=1),
            horizon=2000,
        )
        for i in range(4)
    ]
    traces = await run_batch(jobs, workers=4)
    for trace in traces[1:]:
        np.testing.assert_array_equal(trace.chosen, traces[0].chosen)


@pytest.mark.asyncio
async def test_batch_propagates_failures(spec):
    jobs = [
        SimJob(name="ok", spec=spec, policy=MaxWeight(spec.d, spec.service_set), arrivals=ArrivalModel(), horizon=10),
        SimJob(name="bad", spec=spec, policy=MaxWeight(spec.d, spec.service_set), arrivals=ArrivalModel(), horizon=0),
    ]
    with pytest.raises(ValueError):
        await run_batch(jobs)
