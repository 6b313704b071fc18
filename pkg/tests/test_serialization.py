"""Tests for config parsing, msgpack documents and output writers."""

import json

import msgpack
import numpy as np
import pytest

from overload.core.errors import ConfigError
from overload.core.model import build_system
from overload.sim.arrivals import ArrivalModel
from overload.sim.engine import replay, run
from overload.sim.policies import MaxWeight, StationaryMixture
from overload.storage.schema import load_config, parse_rational
from overload.storage.serialization import pack_system, pack_trace, unpack_system, unpack_trace
from overload.storage.writers import series_header, write_series_csv, write_trace


@pytest.fixture
def spec():
    return build_system([[4, 0], [3, 1], [1, 2]], [3, 2], [1, 4])


def _write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


@pytest.mark.parametrize("value, expected", [("13/8", 1.625), ("2/3", 2 / 3), (3, 3.0), ("0.25", 0.25)])
def test_parse_rational(value, expected):
    assert parse_rational(value) == expected


@pytest.mark.parametrize("value", ["1/0", "abc", True, None])
def test_parse_rational_rejects(value):
    with pytest.raises(ValueError):
        parse_rational(value)


def test_load_config(tmp_path):
    path = _write_config(
        tmp_path,
        {
            "system": {"service_vectors": [[1, 0, 1], [0, 1, 1], ["3/4", "3/4", 2]], "rho": ["13/8", "13/8", "5/2"]},
            "theta": ["1/3", "1/3", "1/3"],
        },
    )
    config = load_config(path)
    assert config.system.rho == [1.625, 1.625, 2.5]
    assert config.service_set().matrix[2, 0] == 0.75
    assert config.horizon == 100_000
    np.testing.assert_allclose(config.target().theta, [1 / 3] * 3)


def test_load_config_mode_switch_defaults(tmp_path):
    path = _write_config(
        tmp_path,
        {
            "system": {"service_vectors": [[4, 0], [3, 1]], "rho": [4, 1]},
            "arrivals": {"kind": "mode_switch", "stable_rho": [1, 0]},
        },
    )
    model = load_config(path).arrival_model()
    np.testing.assert_array_equal(model.unstable_rho, [4, 1])
    assert model.period == 500


@pytest.mark.parametrize(
    "data",
    [
        {"system": {"service_vectors": [[1, 0]], "rho": [1]}, "bogus": 1},
        {"system": {"service_vectors": [[1, 0]], "rho": ["x"]}},
        {"system": {"service_vectors": [[1, 0]], "rho": [1, 1]}, "arrivals": {"kind": "mode_switch"}},
        {"system": {"service_vectors": [[1, 0]], "rho": [1, 1]}, "horizon": 0},
    ],
)
def test_load_config_rejects(tmp_path, data):
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path, data))


def test_load_config_missing_or_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_system_document(spec):
    restored = unpack_system(pack_system(spec))
    np.testing.assert_array_equal(restored.service_set.matrix, spec.service_set.matrix)
    np.testing.assert_array_equal(restored.rho.rho, spec.rho.rho)
    np.testing.assert_array_equal(restored.d.d, spec.d.d)


def test_trace_document_replays(spec, tmp_path):
    """Test that a stored trace is bit-identical and still replays."""
    trace = run(spec, StationaryMixture([0.3, 0.3, 0.3], seed=8), ArrivalModel(seed=8), 1500)
    restored = unpack_trace(pack_trace(trace))
    for name in ("x", "chosen", "departures", "arrivals"):
        np.testing.assert_array_equal(getattr(restored, name), getattr(trace, name))
    assert restored.config == trace.config
    assert replay(restored, spec)

    path = write_trace(trace, tmp_path / "run.trace.msgpack")
    assert replay(unpack_trace(path.read_bytes()), spec, StationaryMixture([0.3, 0.3, 0.3], seed=8))


@pytest.mark.parametrize("payload", [b"\xc1", msgpack.packb({"version": 99}), msgpack.packb([1, 2])])
def test_unpack_rejects(payload):
    with pytest.raises(ConfigError):
        unpack_trace(payload)


def test_series_csv(spec, tmp_path):
    trace = run(spec, MaxWeight(spec.d, spec.service_set), ArrivalModel(seed=3), 250)
    path = write_series_csv(trace, tmp_path / "series.csv", stride=100)
    lines = path.read_text().splitlines()
    assert lines[0] == series_header(2) == "t,x_1,x_2,scaled_1,scaled_2,ratio_1,ratio_2,chosen"
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "100", "200", "250"]
    assert lines[1].endswith(",0")
    last = lines[-1].split(",")
    assert int(last[-1]) == trace.chosen[-1] + 1
    assert float(last[1]) == pytest.approx(trace.x[-1, 0])
