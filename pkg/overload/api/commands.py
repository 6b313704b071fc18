"""Command handlers behind the CLI.

Handlers take a validated ``ExperimentConfig`` and return plain dicts (1-based service
indices) that ``overload.main`` renders. Simulation handlers are coroutines driven by
``asyncio.run``.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..config import settings
from ..core.control import (
    FeasibilityVerdict,
    check_feasibility,
    classify_rho,
    feasible_directions,
    partition_overload,
)
from ..core.errors import ConfigError, PreconditionError
from ..core.eta import eta_oracle, solve_eta
from ..core.geometry import is_stabilizable
from ..core.model import FairnessTarget, WeightMatrix
from ..sim.analysis import measure_direction, window_summaries
from ..sim.batch import SimJob, run_batch
from ..sim.policies import MaxWeight
from ..storage.schema import ExperimentConfig
from ..storage.writers import write_series_csv, write_summary, write_trace

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_RES = 300


def _one_based(indices) -> List[int]:
    return [int(i) + 1 for i in indices]


def _round(values, digits: int = 9) -> List[float]:
    return np.round(np.asarray(values, dtype=np.float64), digits).tolist()


def apply_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    horizon: Optional[int] = None,
    out: Optional[str] = None,
    stride: Optional[int] = None,
) -> ExperimentConfig:
    """Config with command-line overrides applied and the arrival seed resolved."""
    resolved_seed = seed if seed is not None else config.arrivals.seed
    if resolved_seed is None:
        resolved_seed = settings.default_seed
    output = config.output.model_copy(
        update={k: v for k, v in (("dir", out), ("stride", stride)) if v is not None}
    )
    return config.model_copy(
        update={
            "arrivals": config.arrivals.model_copy(update={"seed": resolved_seed}),
            "horizon": horizon if horizon is not None else config.horizon,
            "output": output,
        }
    )


def cmd_eta(config: ExperimentConfig, oracle_res: Optional[int] = None) -> Dict[str, Any]:
    """Growth ray for the configured system, optionally cross-checked by the grid oracle."""
    spec = config.system_spec()
    solution = solve_eta(spec.rho, spec.service_set, spec.d)
    result: Dict[str, Any] = {
        "status": "STABLE" if solution.stable else "OVERLOADED",
        "eta": _round(solution.eta),
        "alpha": _round(solution.alpha.alpha),
        "objective": solution.objective,
        "kkt_residual": solution.kkt_residual,
        "iterations": solution.iterations,
    }
    res = oracle_res if oracle_res is not None else config.oracle_res
    if res is not None:
        oracle = eta_oracle(spec.rho, spec.service_set, spec.d, res)
        result["oracle_eta"] = _round(oracle)
        result["oracle_max_deviation"] = float(np.abs(oracle - solution.eta).max())
    return result


def cmd_oracle(config: ExperimentConfig, oracle_res: Optional[int] = None) -> Dict[str, Any]:
    spec = config.system_spec()
    res = oracle_res or config.oracle_res or DEFAULT_ORACLE_RES
    oracle = eta_oracle(spec.rho, spec.service_set, spec.d, res)
    return {"resolution": res, "eta": _round(oracle)}


def cmd_feasible(config: ExperimentConfig) -> Dict[str, Any]:
    """Feasibility report for theta, or every reachable direction when theta is absent."""
    service_set = config.service_set()
    rho = np.array(config.system.rho)
    if config.theta is None:
        directions = feasible_directions(rho, service_set)
        return {
            "status": "STABLE" if directions.stable else "OVERLOADED",
            "direction_sets": [
                {
                    "subset": _one_based(s.subset),
                    "v": None if s.v is None else _round(s.v.v),
                    "generators": [_round(g) for g in s.generators],
                }
                for s in directions.sets
            ],
        }

    report = check_feasibility(config.target(), rho, service_set)
    result: Dict[str, Any] = {
        "verdict": report.verdict.value.upper(),
        "theta": _round(report.theta.theta),
        "reason": report.reason,
    }
    if report.feasible:
        result.update(
            subset=_one_based(report.subset),
            v=_round(report.v.v),
            alpha=_round(report.alpha.alpha),
            eta=_round(report.eta),
            d=_round(report.d.display()),
        )
    return result


def cmd_partition(config: ExperimentConfig) -> Dict[str, Any]:
    """Cells of the overload region for theta, and the cell holding the configured rho."""
    service_set = config.service_set()
    partition = partition_overload(config.target(), service_set)
    result: Dict[str, Any] = {
        "theta": _round(partition.theta.theta),
        "cells": [
            {
                "subset": _one_based(cell.subset),
                "v": _round(cell.v.v),
                "d": _round(cell.d.display()),
                "generators": [_round(g) for g in cell.generators],
            }
            for cell in partition.cells
        ],
    }
    rho = np.array(config.system.rho)
    if is_stabilizable(rho, service_set):
        result["rho_cell"] = "STABLE"
    else:
        d = classify_rho(rho, partition)
        result["rho_cell"] = None if d is None else _round(d.display())
    return result


def cmd_synth(config: ExperimentConfig) -> Dict[str, Any]:
    """MaxWeight weights that steer the configured load toward theta."""
    report = check_feasibility(config.target(), np.array(config.system.rho), config.service_set())
    if not report.feasible:
        raise PreconditionError(f"theta is not reachable: {report.verdict.value.upper()} ({report.reason})")
    return {"d": _round(report.d.display()), "subset": _one_based(report.subset)}


def resolve_weights(config: ExperimentConfig) -> WeightMatrix:
    """Explicit D, or the D synthesized for theta.

    Raises:
        ConfigError: Unless exactly one of theta and d is given
        PreconditionError: If theta is not reachable at the configured load
    """
    if (config.theta is None) == (config.d is None):
        raise ConfigError("simulate needs exactly one of theta and d")
    if config.d is not None:
        return WeightMatrix(config.d)
    report = check_feasibility(config.target(), np.array(config.system.rho), config.service_set())
    if report.verdict == FeasibilityVerdict.STABLE:
        logger.warning("Load is stabilizable; simulating with identity weights")
        return WeightMatrix.identity(len(config.system.rho))
    if not report.feasible:
        raise PreconditionError(f"theta is not reachable: {report.verdict.value.upper()} ({report.reason})")
    return report.d


async def run_config(
    config: ExperimentConfig,
    d: WeightMatrix,
    target: Optional[FairnessTarget] = None,
) -> Dict[str, Any]:
    """Simulate every initial workload of ``config`` under MaxWeight(d) and write the runs.

    Writes ``<name>_<k>.csv`` and ``<name>_<k>.trace.msgpack`` per run.
    """
    spec = config.system_spec(d)
    arrivals = config.arrival_model()
    out_dir = Path(config.output.dir)
    name = config.output.name
    jobs = [
        SimJob(
            name=f"{name}_{k}",
            spec=spec,
            policy=MaxWeight(d, spec.service_set),
            arrivals=arrivals,
            horizon=config.horizon,
            x0=x0,
            stride=config.output.stride,
        )
        for k, x0 in enumerate(config.workloads())
    ]
    traces = await run_batch(jobs)

    runs = []
    for job, trace in zip(jobs, traces):
        csv_path = write_series_csv(trace, out_dir / f"{job.name}.csv")
        trace_path = write_trace(trace, out_dir / f"{job.name}.trace.msgpack")
        estimate = measure_direction(trace, config.tail_fraction)
        entry: Dict[str, Any] = {
            "name": job.name,
            "x0": trace.x[0].tolist(),
            "eta_hat": _round(estimate.eta_hat),
            "theta_hat": None if estimate.theta_hat is None else _round(estimate.theta_hat),
            "stable": estimate.stable,
            "growing": estimate.growing,
            "csv": str(csv_path),
            "trace": str(trace_path),
        }
        if target is not None and estimate.theta_hat is not None:
            entry["max_deviation"] = float(np.abs(estimate.theta_hat - target.theta).max())
        if arrivals.kind == "mode_switch":
            entry["windows"] = [
                {
                    "index": w.index,
                    "start": w.start,
                    "end": w.end,
                    "mode": "stable" if w.stable else "unstable",
                    "theta_hat": None if w.theta_hat is None else _round(w.theta_hat),
                    "final_total": w.final_total,
                }
                for w in window_summaries(trace, arrivals)
            ]
        runs.append(entry)

    solution = solve_eta(spec.rho, spec.service_set, d)
    return {
        "d": _round(d.display()),
        "target": None if target is None else _round(target.theta),
        "eta": _round(solution.eta),
        "runs": runs,
    }


async def cmd_simulate(config: ExperimentConfig) -> Dict[str, Any]:
    """Simulate the configured system and write ``<name>_summary.json``."""
    d = resolve_weights(config)
    target = config.target() if config.theta is not None else None
    result = await run_config(config, d, target)
    summary = {"config": config.model_dump(mode="json"), **result}
    path = write_summary(summary, Path(config.output.dir) / f"{config.output.name}_summary.json")
    result["summary"] = str(path)
    return result
