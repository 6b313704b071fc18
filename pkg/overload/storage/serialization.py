"""msgpack encoding of system specs and simulation traces.

Arrays are stored as flat lists plus a shape; Python floats pack as msgpack float64, so
a round trip is bit-exact.
"""

from typing import Any, Dict

import msgpack  # type: ignore[import-untyped]
import numpy as np

from ..core.errors import ConfigError
from ..core.model import SystemSpec, build_system
from ..sim.engine import SimTrace

FORMAT_VERSION = 1


def _array(arr: np.ndarray) -> Dict[str, Any]:
    return {"shape": list(arr.shape), "dtype": str(arr.dtype), "data": arr.ravel().tolist()}


def _restore(obj: Dict[str, Any]) -> np.ndarray:
    arr = np.array(obj["data"], dtype=obj["dtype"]).reshape(obj["shape"])
    arr.setflags(write=False)
    return arr


def pack_system(spec: SystemSpec) -> bytes:
    return msgpack.packb(
        {
            "version": FORMAT_VERSION,
            "service_vectors": spec.service_set.matrix.tolist(),
            "rho": spec.rho.rho.tolist(),
            "d": spec.d.d.tolist(),
        }
    )


def unpack_system(payload: bytes) -> SystemSpec:
    data = _unpack(payload)
    return build_system(data["service_vectors"], data["rho"], data["d"])


def pack_trace(trace: SimTrace) -> bytes:
    return msgpack.packb(
        {
            "version": FORMAT_VERSION,
            "x": _array(trace.x),
            "chosen": _array(trace.chosen),
            "departures": _array(trace.departures),
            "arrivals": _array(trace.arrivals),
            "policy": trace.policy,
            "config": trace.config,
            "stride": trace.stride,
        }
    )


def unpack_trace(payload: bytes) -> SimTrace:
    data = _unpack(payload)
    return SimTrace(
        x=_restore(data["x"]),
        chosen=_restore(data["chosen"]),
        departures=_restore(data["departures"]),
        arrivals=_restore(data["arrivals"]),
        policy=data["policy"],
        config=data["config"],
        stride=data["stride"],
    )


def _unpack(payload: bytes) -> Dict[str, Any]:
    try:
        data = msgpack.unpackb(payload, raw=False)
    except (msgpack.ExtraData, msgpack.FormatError, msgpack.StackError, ValueError) as e:
        raise ConfigError(f"cannot decode payload: {e}") from e
    if not isinstance(data, dict) or data.get("version") != FORMAT_VERSION:
        raise ConfigError("payload is not a supported overload document")
    return data
