"""Time-dependent matrix paths t -> A(t)."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np


class MatrixPath:
    """Evaluable time-dependent matrix, optionally with an analytic
    derivative. Integrators that only need increments call value();
    the gauged-system baseline asks for derivative() and falls back to a
    finite difference when none is provided."""

    def __init__(
        self,
        value_fn: Callable[[float], np.ndarray],
        shape: tuple[int, int],
        derivative_fn: Optional[Callable[[float], np.ndarray]] = None,
    ):
        self._value_fn = value_fn
        self._derivative_fn = derivative_fn
        self.shape = tuple(shape)

    @property
    def has_derivative(self) -> bool:
        return self._derivative_fn is not None

    def value(self, t: float) -> np.ndarray:
        return self._value_fn(float(t))

    def derivative(self, t: float) -> np.ndarray:
        if self._derivative_fn is None:
            raise ValueError("path has no analytic derivative")
        return self._derivative_fn(float(t))


def constant_path(a: np.ndarray) -> MatrixPath:
    """A(t) = a for all t, with zero derivative."""
    a = np.asarray(a, dtype=float)
    zero = np.zeros_like(a)
    return MatrixPath(lambda t: a, a.shape, lambda t: zero)


def linear_path(a0: np.ndarray, rate: np.ndarray) -> MatrixPath:
    """A(t) = a0 + t * rate."""
    a0 = np.asarray(a0, dtype=float)
    rate = np.asarray(rate, dtype=float)
    return MatrixPath(lambda t: a0 + t * rate, a0.shape, lambda t: rate)
