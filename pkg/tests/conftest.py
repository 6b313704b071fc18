"""Shared system fixtures."""

import numpy as np
import pytest

from overload.core.model import ServiceSet, WeightMatrix


@pytest.fixture
def two_queue():
    """S = {(4,0), (3,1)}: the two-vector system of the first experiment."""
    return ServiceSet.from_rows([[4, 0], [3, 1]])


@pytest.fixture
def three_vector():
    """S = {(4,0), (3,1), (1,2)}: two relevant boundaries."""
    return ServiceSet.from_rows([[4, 0], [3, 1], [1, 2]])


@pytest.fixture
def diagonal_five():
    """S = 5 I_3: one queue served per slot."""
    return ServiceSet.from_rows(5 * np.eye(3))


@pytest.fixture
def no_boundary():
    """Three queues where no MaxWeight weights reach the balanced direction."""
    return ServiceSet.from_rows([[1, 0, 1], [0, 1, 1], [0.75, 0.75, 2]])


@pytest.fixture
def d12():
    return WeightMatrix([1, 2])
