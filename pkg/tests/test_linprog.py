"""Tests for the dense simplex solver."""

import numpy as np
import pytest

from overload.core.linprog import INFEASIBLE, OPTIMAL, UNBOUNDED, is_feasible, linprog


def test_inequality_optimum():
    """Test max x + y subject to x + 2y <= 4, 3x + y <= 6."""
    result = linprog(
        np.array([-1.0, -1.0]),
        A_ub=np.array([[1.0, 2.0], [3.0, 1.0]]),
        b_ub=np.array([4.0, 6.0]),
    )
    assert result.status == OPTIMAL
    np.testing.assert_allclose(result.x, [1.6, 1.2], atol=1e-12)
    assert result.fun == pytest.approx(-2.8)


def test_equality_constraint():
    result = linprog(np.array([1.0, 0.0]), A_eq=np.array([[1.0, 1.0]]), b_eq=np.array([1.0]))
    assert result.success
    np.testing.assert_allclose(result.x, [0.0, 1.0], atol=1e-12)


def test_negative_right_hand_side():
    """Test x >= 2 written as -x <= -2."""
    result = linprog(np.array([1.0]), A_ub=np.array([[-1.0]]), b_ub=np.array([-2.0]))
    assert result.success
    assert result.x[0] == pytest.approx(2.0)


def test_infeasible():
    result = linprog(
        np.array([0.0]),
        A_ub=np.array([[1.0], [-1.0]]),
        b_ub=np.array([1.0, -2.0]),
    )
    assert result.status == INFEASIBLE
    assert result.x is None


def test_unbounded():
    result = linprog(np.array([-1.0, 0.0]), A_ub=np.array([[1.0, -1.0]]), b_ub=np.array([1.0]))
    assert result.status == UNBOUNDED


def test_redundant_equalities():
    """Test that duplicated equality rows do not break phase 1."""
    result = linprog(
        np.array([1.0, 2.0]),
        A_eq=np.array([[1.0, 1.0], [2.0, 2.0]]),
        b_eq=np.array([1.0, 2.0]),
    )
    assert result.success
    np.testing.assert_allclose(result.x, [1.0, 0.0], atol=1e-12)


def test_degenerate_problem_terminates():
    """Test a degenerate vertex that cycles without an anti-cycling rule."""
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A_ub = np.array(
        [
            [0.25, -60.0, -0.04, 9.0],
            [0.5, -90.0, -0.02, 3.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    b_ub = np.array([0.0, 0.0, 1.0])
    result = linprog(c, A_ub, b_ub)
    assert result.success
    assert result.fun == pytest.approx(-0.05)


def test_is_feasible_returns_point():
    A_ub = np.array([[1.0, 1.0]])
    b_ub = np.array([1.0])
    A_eq = np.array([[1.0, -1.0]])
    b_eq = np.array([0.25])
    x = is_feasible(A_ub, b_ub, A_eq, b_eq)
    assert x is not None
    assert x.sum() <= 1.0 + 1e-12
    assert x[0] - x[1] == pytest.approx(0.25)
    assert is_feasible(A_eq=np.array([[1.0]]), b_eq=np.array([-1.0])) is None
