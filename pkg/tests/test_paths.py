"""Tests for time-dependent matrix paths."""

import numpy as np
import pytest

from dlra.paths import MatrixPath, constant_path, linear_path


def test_constant_path():
    a = np.arange(6.0).reshape(2, 3)
    path = constant_path(a)
    assert path.shape == (2, 3)
    assert path.has_derivative
    assert np.array_equal(path.value(0.0), a)
    assert np.array_equal(path.value(3.7), a)
    assert np.allclose(path.derivative(1.0), 0.0)


def test_linear_path():
    rng = np.random.default_rng(0)
    a0 = rng.standard_normal((4, 4))
    rate = rng.standard_normal((4, 4))
    path = linear_path(a0, rate)
    assert np.allclose(path.value(0.5), a0 + 0.5 * rate)
    assert np.array_equal(path.derivative(2.0), rate)


def test_path_without_derivative_raises():
    path = MatrixPath(lambda t: np.zeros((2, 2)), (2, 2))
    assert not path.has_derivative
    with pytest.raises(ValueError):
        path.derivative(0.0)
