"""Output files: plot-ready CSV series, JSON summaries and msgpack traces."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .serialization import pack_trace
from ..sim.engine import SimTrace

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def series_header(q: int) -> str:
    cols = ["t"]
    for prefix in ("x", "scaled", "ratio"):
        cols += [f"{prefix}_{i + 1}" for i in range(q)]
    cols.append("chosen")
    return ",".join(cols)


def write_series_csv(trace: SimTrace, path: PathLike, stride: Optional[int] = None) -> Path:
    """Write the downsampled series of a run.

    ``chosen`` is the 1-based service index used in the slot that produced X(t); 0 marks
    t = 0 and idle slots.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    slots = trace.sample_slots(stride)
    q = trace.q
    chosen = np.zeros(slots.size)
    after = slots > 0
    chosen[after] = trace.chosen[slots[after] - 1] + 1

    table = np.column_stack(
        [slots, trace.x[slots], trace.scaled()[slots], trace.ratios()[slots], chosen]
    )
    fmt = ["%d"] + ["%.9g"] * (3 * q) + ["%d"]
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=series_header(q), comments="")
    logger.info(f"Wrote {slots.size} rows to {path}")
    return path


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def write_summary(payload: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), indent=2) + "\n")
    logger.info(f"Wrote summary {path}")
    return path


def write_trace(trace: SimTrace, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pack_trace(trace))
    return path

