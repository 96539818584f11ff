"""Closed-form benchmark functions of one continuous and one categorical input."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DomainError


def _check(x, u, L):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u)
    if np.any(u != np.round(u)):
        raise DomainError("levels must be integers")
    u = u.astype(int)
    if u.size and (u.min() < 1 or u.max() > L):
        raise DomainError(f"levels must be in 1..{L}")
    if x.size and (np.nanmin(x) < 0 or np.nanmax(x) > 1):
        raise DomainError("x must lie in [0, 1]")
    return np.broadcast_arrays(x, u)


def example1(x, u):
    """Two families of phase-shifted cosines: levels 1-9 and 10-13."""
    x, u = _check(x, u, 13)
    p = np.where(u > 9, 0.4 + u / 15.0, 0.0)
    return np.cos(3.5 * np.pi * x + p * np.pi - u / 20.0)


def example2(x, u):
    """Near-linear curves (levels 1-4) and two opposite-signed damped sinusoid families (5-7, 8-10)."""
    x, u = _check(x, u, 10)
    lin = (x + 0.01 * (x - 0.5) ** 2) * u / 10.0
    s1 = 0.9 * np.cos(2 * np.pi * (x + (u - 4) / 20.0)) * np.exp(-x)
    s2 = -0.7 * np.cos(2 * np.pi * (x + (u - 7) / 20.0)) * np.exp(-x)
    return np.where(u <= 4, lin, np.where(u <= 7, s1, s2))


@dataclass(frozen=True)
class TestFunction:
    id: str
    levels: int
    evaluate: Callable

    __test__ = False  # not a pytest class

    def __call__(self, x, u):
        return self.evaluate(x, u)


TEST_FUNCTIONS = {
    "example1": TestFunction("example1", 13, example1),
    "example2": TestFunction("example2", 10, example2),
}


def get_test_function(name: str) -> TestFunction:
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise DomainError(f"unknown test function {name!r}; choose from {sorted(TEST_FUNCTIONS)}") from None


def eval_test_function(name: str, x, u):
    return get_test_function(name)(x, u)
