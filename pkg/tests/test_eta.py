"""Tests for the growth-ray solver, fixed-point checks and fairness rays."""

import numpy as np
import pytest

from overload.core.errors import BudgetExceededError, ConvergenceError, PreconditionError
from overload.core.eta import (
    EtaSolution,
    eta_oracle,
    maxmin_eta,
    proportional_eta,
    project_subsimplex,
    solve_eta,
    verify_fixed_point,
)
from overload.core.geometry import is_stabilizable
from overload.core.model import LoadVector, MixtureWeights, ServiceSet, WeightMatrix


def _candidate(eta, alpha):
    return EtaSolution(
        eta=np.asarray(eta, dtype=float),
        alpha=MixtureWeights(alpha),
        objective=0.0,
        kkt_residual=0.0,
        iterations=0,
    )


def test_two_queue_closed_form(two_queue, d12):
    """Test eta = (2/3, 1/3) with alpha = (1/3, 2/3)."""
    solution = solve_eta(LoadVector([4, 1]), two_queue, d12)
    np.testing.assert_allclose(solution.eta, [2 / 3, 1 / 3], atol=1e-6)
    np.testing.assert_allclose(solution.alpha.alpha, [1 / 3, 2 / 3], atol=1e-6)
    assert not solution.stable
    assert verify_fixed_point(solution, [4, 1], two_queue, d12).ok


def test_diagonal_service(diagonal_five):
    solution = solve_eta([3, 2, 1], diagonal_five, WeightMatrix([2, 3, 6]))
    np.testing.assert_allclose(solution.eta, [1 / 2, 1 / 3, 1 / 6], atol=1e-6)
    np.testing.assert_allclose(solution.alpha.alpha, [1 / 2, 1 / 3, 1 / 6], atol=1e-6)


def test_stable_load_gives_zero_ray():
    s = ServiceSet.from_rows([[2, 1], [1, 1.5]])
    solution = solve_eta([1, 1], s, WeightMatrix.identity(2))
    assert solution.stable
    np.testing.assert_array_equal(solution.eta, [0, 0])
    report = verify_fixed_point(solution, [1, 1], s, WeightMatrix.identity(2))
    assert report.ok and report.stable


def test_single_vector_has_no_control():
    s = ServiceSet.from_rows([[3, 1]])
    for d in ([1, 1], [1, 9]):
        solution = solve_eta([4, 1], s, WeightMatrix(d))
        np.testing.assert_allclose(solution.eta, [1, 0], atol=1e-9)


def test_verify_rejects_wrong_candidate(two_queue, d12):
    report = verify_fixed_point(_candidate([1, 0], [1, 0]), [4, 1], two_queue, d12)
    assert not report.ok
    assert report.residuals["recursion"] > 0.5


def test_verify_accepts_known_fixed_point(two_queue, d12):
    report = verify_fixed_point(_candidate([2 / 3, 1 / 3], [1 / 3, 2 / 3]), [4, 1], two_queue, d12)
    assert report.ok
    assert report.residuals["identity"] <= 1e-12


def test_convergence_error_carries_best(three_vector):
    """Test that hitting the iteration ceiling reports the best iterate."""
    with pytest.raises(ConvergenceError) as excinfo:
        solve_eta([3, 2], three_vector, WeightMatrix([1, 4]), alpha0=[1, 0, 0], max_iter=2, tau_fix=-1.0)
    assert isinstance(excinfo.value.best, EtaSolution)


def test_project_subsimplex():
    np.testing.assert_allclose(project_subsimplex(np.array([0.2, -0.3])), [0.2, 0.0])
    p = project_subsimplex(np.array([2.0, 1.0, -1.0]))
    np.testing.assert_allclose(p, [1.0, 0.0, 0.0])
    assert p.sum() == pytest.approx(1.0)


def test_oracle_matches_closed_form(two_queue, d12):
    np.testing.assert_allclose(eta_oracle([4, 1], two_queue, d12, 300), [2 / 3, 1 / 3], atol=1e-2)


def test_oracle_stable_is_zero(two_queue, d12):
    assert np.abs(eta_oracle([1, 0.5], two_queue, d12, 50)).max() <= 0.1


def test_oracle_regression_value(no_boundary):
    """Test the grid minimum at alpha = (0, 0, 1), where (rho - S_3) is a fixed point."""
    eta = eta_oracle([13 / 8, 13 / 8, 5 / 2], no_boundary, WeightMatrix.identity(3), 200)
    np.testing.assert_allclose(eta, [7 / 8, 7 / 8, 1 / 2], atol=1e-9)
    solution = solve_eta([13 / 8, 13 / 8, 5 / 2], no_boundary, WeightMatrix.identity(3))
    np.testing.assert_allclose(solution.eta, eta, atol=1e-6)


def test_oracle_budget(three_vector, d12):
    with pytest.raises(BudgetExceededError):
        eta_oracle([4, 1], three_vector, d12, 1000, budget=1e4)


def test_maxmin(two_queue):
    eta = maxmin_eta([4, 1], two_queue)
    np.testing.assert_allclose(eta, [0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(maxmin_eta([1, 0.5], two_queue), [0, 0], atol=1e-9)
    symmetric = ServiceSet.from_rows([[4, 0], [0, 4]])
    np.testing.assert_allclose(maxmin_eta([3, 3], symmetric), [1, 1], atol=1e-9)


def test_proportional(two_queue):
    eta, k = proportional_eta([4, 1], two_queue)
    assert k == pytest.approx(0.2, abs=1e-7)
    np.testing.assert_allclose(eta, [0.8, 0.2], atol=1e-6)
    assert is_stabilizable((1 - k) * np.array([4, 1]), two_queue)


def test_proportional_near_boundary(two_queue):
    eps = 0.1
    _, k = proportional_eta((1 + eps) * np.array([3.5, 0.5]), two_queue)
    assert k == pytest.approx(eps / (1 + eps), abs=1e-7)


def test_proportional_rejects_stable(two_queue):
    with pytest.raises(PreconditionError):
        proportional_eta([1, 0.5], two_queue)


def _random_instance(rng):
    while True:
        n = int(rng.integers(2, 4))
        q = int(rng.integers(2, 4))
        rows = rng.integers(0, 5, size=(n, q)).astype(float)
        if np.any(rows.sum(axis=1) == 0) or len({r.tobytes() for r in rows}) < n:
            continue
        s = ServiceSet.from_rows(rows)
        rho = rng.uniform(0.5, 4.0, size=q)
        if is_stabilizable(rho, s):
            continue
        return s, rho, WeightMatrix(rng.uniform(1.0, 2.0, size=q))


@pytest.mark.slow
def test_solver_agrees_with_oracle():
    rng = np.random.default_rng(20240)
    for _ in range(200):
        s, rho, d = _random_instance(rng)
        solution = solve_eta(rho, s, d)
        oracle = eta_oracle(rho, s, d, 400 if s.n == 3 else 2000)
        np.testing.assert_allclose(solution.eta, oracle, atol=5e-2)
        report = verify_fixed_point(solution, rho, s, d)
        assert report.ok
        scale = max(1.0, abs(float(rho @ (d.d * solution.eta))))
        assert report.residuals["identity"] <= 1e-8 * scale


@pytest.mark.slow
def test_ray_independent_of_initial_mixture():
    rng = np.random.default_rng(11)
    for _ in range(10):
        s, rho, d = _random_instance(rng)
        reference = solve_eta(rho, s, d).eta
        for _ in range(10):
            start = rng.dirichlet(np.ones(s.n)) * rng.uniform(0.2, 1.0)
            np.testing.assert_allclose(solve_eta(rho, s, d, alpha0=start).eta, reference, atol=1e-6)


def test_ray_invariant_to_weight_scale():
    rng = np.random.default_rng(31)
    for _ in range(25):
        s, rho, d = _random_instance(rng)
        reference = solve_eta(rho, s, d).eta
        for c in (0.01, 3.7, 250.0):
            np.testing.assert_allclose(solve_eta(rho, s, d.scaled(c)).eta, reference, atol=1e-6)


def test_dominated_vector_leaves_ray_unchanged():
    """Test that appending a vector below a mixture of the others does not move the ray."""
    rng = np.random.default_rng(32)
    checked = 0
    while checked < 25:
        s, rho, d = _random_instance(rng)
        extra = rng.uniform(0.3, 0.9) * (rng.dirichlet(np.ones(s.n)) @ s.matrix)
        if any(np.allclose(extra, row) for row in s.matrix):
            continue
        extended = ServiceSet.from_rows(np.vstack([s.matrix, extra]))
        np.testing.assert_allclose(solve_eta(rho, extended, d).eta, solve_eta(rho, s, d).eta, atol=1e-6)
        checked += 1
