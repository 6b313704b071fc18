"""Tests for the command-line interface."""

import json

import numpy as np
import pytest

from overload.api import commands
from overload.core.errors import ConvergenceError
from overload.main import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, main

TWO_QUEUE = {"service_vectors": [[4, 0], [3, 1]], "rho": [4, 1]}


def _config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _fields(output):
    """Parse ``key: value`` lines back into a dict."""
    fields = {}
    for line in output.strip().splitlines():
        key, _, value = line.partition(": ")
        try:
            fields[key] = json.loads(value)
        except json.JSONDecodeError:
            fields[key] = value
    return fields


def test_eta_command(tmp_path, capsys):
    path = _config(tmp_path, {"system": TWO_QUEUE, "d": [1, 2]})
    assert main(["eta", "--config", path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "eta: [0.666666667, 0.333333333]" in out
    fields = _fields(out)
    assert fields["status"] == "OVERLOADED"
    np.testing.assert_allclose(fields["alpha"], [1 / 3, 2 / 3], atol=1e-8)


def test_eta_command_with_oracle(tmp_path, capsys):
    path = _config(tmp_path, {"system": TWO_QUEUE, "d": [1, 2]})
    assert main(["eta", "--config", path, "--oracle-res", "300"]) == EXIT_OK
    fields = _fields(capsys.readouterr().out)
    assert fields["oracle_max_deviation"] <= 1e-2


def test_eta_command_stable(tmp_path, capsys):
    path = _config(tmp_path, {"system": {"service_vectors": [[4, 0], [3, 1]], "rho": [1, 0.5]}})
    assert main(["eta", "--config", path]) == EXIT_OK
    fields = _fields(capsys.readouterr().out)
    assert fields["status"] == "STABLE"
    assert fields["eta"] == [0.0, 0.0]


def test_oracle_command(tmp_path, capsys):
    path = _config(
        tmp_path,
        {"system": {"service_vectors": [[1, 0, 1], [0, 1, 1], ["3/4", "3/4", 2]], "rho": ["13/8", "13/8", "5/2"]}},
    )
    assert main(["oracle", "--config", path, "--oracle-res", "200"]) == EXIT_OK
    fields = _fields(capsys.readouterr().out)
    np.testing.assert_allclose(fields["eta"], [7 / 8, 7 / 8, 1 / 2], atol=1e-9)


def test_feasible_no_boundary(tmp_path, capsys):
    path = _config(
        tmp_path,
        {
            "system": {"service_vectors": [[1, 0, 1], [0, 1, 1], ["3/4", "3/4", 2]], "rho": ["13/8", "13/8", "5/2"]},
            "theta": ["1/3", "1/3", "1/3"],
        },
    )
    assert main(["feasible", "--config", path]) == EXIT_OK
    assert _fields(capsys.readouterr().out)["verdict"] == "INFEASIBLE_NO_BOUNDARY"


def test_feasible_reports_one_based_subset(tmp_path, capsys):
    path = _config(tmp_path, {"system": TWO_QUEUE, "theta": ["2/3", "1/3"]})
    assert main(["feasible", "--config", path]) == EXIT_OK
    fields = _fields(capsys.readouterr().out)
    assert fields["verdict"] == "FEASIBLE"
    assert fields["subset"] == [1, 2]
    np.testing.assert_allclose(fields["d"], [1, 2], rtol=1e-6)


def test_feasible_directions_without_theta(tmp_path, capsys):
    path = _config(tmp_path, {"system": {"service_vectors": [[1, 2], [3, 1]], "rho": [4, 4]}})
    assert main(["feasible", "--config", path]) == EXIT_OK
    fields = _fields(capsys.readouterr().out)
    assert fields["status"] == "OVERLOADED"
    np.testing.assert_allclose(fields["direction_sets"][0]["generators"], [[0.25, 0.75], [0.6, 0.4]], atol=1e-9)


def test_partition_command(tmp_path, capsys):
    path = _config(
        tmp_path,
        {"system": {"service_vectors": [[4, 0], [3, 1], [1, 2]], "rho": [3, 2]}, "theta": ["2/3", "1/3"]},
    )
    assert main(["partition", "--config", path]) == EXIT_OK
    fields = _fields(capsys.readouterr().out)
    ds = [cell["d"] for cell in fields["cells"]]
    np.testing.assert_allclose(ds, [[1, 2], [1, 4]], rtol=1e-6)
    assert [cell["subset"] for cell in fields["cells"]] == [[1, 2], [2, 3]]
    np.testing.assert_allclose(fields["rho_cell"], [1, 4], rtol=1e-6)


def test_synth_command(tmp_path, capsys):
    path = _config(
        tmp_path,
        {
            "system": {"service_vectors": [[5, 0, 0], [0, 5, 0], [0, 0, 5]], "rho": [3, 2, 1]},
            "theta": ["1/2", "1/3", "1/6"],
        },
    )
    assert main(["synth", "--config", path]) == EXIT_OK
    np.testing.assert_allclose(_fields(capsys.readouterr().out)["d"], [1, 1.5, 3], rtol=1e-6)


def test_synth_unreachable_exits_one(tmp_path, capsys):
    path = _config(
        tmp_path,
        {"system": {"service_vectors": [[4, 0], [3, 1], [1, 2]], "rho": [5, 0.5]}, "theta": ["2/3", "1/3"]},
    )
    assert main(["synth", "--config", path]) == EXIT_INPUT
    assert "not reachable" in capsys.readouterr().err


@pytest.mark.parametrize(
    "data",
    [
        {"system": {"service_vectors": [[4, 0]], "rho": [4, 1, 1]}},
        {"system": {"service_vectors": [[4, 0]], "rho": [4]}, "unknown": True},
        {"system": {"service_vectors": [[-1, 0]], "rho": [4, 1]}},
    ],
)
def test_bad_config_exits_one(tmp_path, capsys, data):
    assert main(["eta", "--config", _config(tmp_path, data)]) == EXIT_INPUT
    assert capsys.readouterr().err.startswith("error:")


def test_missing_config_exits_one(tmp_path):
    assert main(["eta", "--config", str(tmp_path / "missing.json")]) == EXIT_INPUT


def test_numerical_failure_exits_two(tmp_path, monkeypatch, capsys):
    def fail(*args, **kwargs):
        raise ConvergenceError("no fixed point within the iteration budget")

    monkeypatch.setattr(commands, "solve_eta", fail)
    path = _config(tmp_path, {"system": TWO_QUEUE, "d": [1, 2]})
    assert main(["eta", "--config", path]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_simulate_needs_theta_or_d(tmp_path):
    path = _config(tmp_path, {"system": TWO_QUEUE})
    assert main(["simulate", "--config", path]) == EXIT_INPUT


def test_simulate_writes_reproducible_files(tmp_path, capsys):
    """Test that reruns with the same seed write byte-identical series."""
    path = _config(
        tmp_path,
        {
            "system": TWO_QUEUE,
            "theta": ["2/3", "1/3"],
            "initial_workloads": [[0, 0], [60, 0]],
            "output": {"name": "two"},
        },
    )
    for out in ("a", "b"):
        args = ["simulate", "--config", path, "--horizon", "3000", "--seed", "7", "--out", str(tmp_path / out)]
        assert main(args) == EXIT_OK
    capsys.readouterr()

    for k in range(2):
        first = (tmp_path / "a" / f"two_{k}.csv").read_bytes()
        assert first == (tmp_path / "b" / f"two_{k}.csv").read_bytes()
        assert (tmp_path / "a" / f"two_{k}.trace.msgpack").exists()

    summary = json.loads((tmp_path / "a" / "two_summary.json").read_text())
    assert summary["config"]["arrivals"]["seed"] == 7
    assert summary["config"]["horizon"] == 3000
    np.testing.assert_allclose(summary["d"], [1, 2], rtol=1e-6)
    assert len(summary["runs"]) == 2


def test_experiment_fig5(tmp_path, capsys):
    assert main(["experiment", "fig5", "--out", str(tmp_path)]) == EXIT_OK
    capsys.readouterr()
    summary = json.loads((tmp_path / "fig5_summary.json").read_text())
    assert summary["checks"] == {"unstable_windows_hit_theta": True, "stable_windows_drain": True}
    assert len(summary["runs"][0]["windows"]) == 8


@pytest.mark.slow
def test_experiment_fig3(tmp_path, capsys):
    assert main(["experiment", "fig3", "--out", str(tmp_path), "--stride", "1000"]) == EXIT_OK
    capsys.readouterr()
    summary = json.loads((tmp_path / "fig3_summary.json").read_text())
    assert summary["checks"] == {"converged_to_theta": True}
    assert len(summary["runs"]) == 3


@pytest.mark.slow
def test_experiment_fig4(tmp_path, capsys):
    """Test that matched weights reach theta and the mismatched weights do not."""
    assert main(["experiment", "fig4", "--out", str(tmp_path), "--stride", "1000"]) == EXIT_OK
    capsys.readouterr()
    summary = json.loads((tmp_path / "fig4_summary.json").read_text())
    assert summary["checks"] == {
        "matched_rho1_hits_theta": True,
        "matched_rho2_hits_theta": True,
        "mismatched_misses_theta": True,
    }


def test_metrics_file(tmp_path, capsys):
    path = _config(tmp_path, {"system": TWO_QUEUE, "d": [1, 2]})
    metrics_path = tmp_path / "metrics.prom"
    assert main(["--metrics", str(metrics_path), "eta", "--config", path]) == EXIT_OK
    text = metrics_path.read_text()
    assert "eta_solves_total" in text
    assert "overload_info" in text
