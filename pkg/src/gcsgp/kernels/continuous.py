"""One-dimensional stationary correlation kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import DomainError

FAMILIES = ("matern52", "squared_exponential", "cosine")
_SQRT5 = math.sqrt(5.0)


def matern52(r):
    r = np.abs(r)
    s = _SQRT5 * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


@dataclass(frozen=True)
class ContinuousKernel1D:
    """Correlation kernel on the real line (equal to 1 on the diagonal).

    ``cosine`` ignores ``lengthscale`` and evaluates ``cos(x - x')``; it is
    valid on ``[0, alpha]`` with ``alpha`` in ``(0, pi]``.
    """

    family: str = "matern52"
    lengthscale: float = 0.2
    alpha: float = math.pi

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "cosine":
            if not 0 < self.alpha <= math.pi:
                raise DomainError(f"cosine range bound must lie in (0, pi], got {self.alpha}")
        elif not self.lengthscale > 0:
            raise DomainError(f"lengthscale must be positive, got {self.lengthscale}")

    @property
    def has_lengthscale(self) -> bool:
        return self.family != "cosine"

    def __call__(self, x, xp):
        d = np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)
        if self.family == "cosine":
            return np.cos(d)
        r = d / self.lengthscale
        if self.family == "matern52":
            return matern52(r)
        return np.exp(-0.5 * r * r)

    def with_lengthscale(self, lengthscale: float) -> "ContinuousKernel1D":
        return ContinuousKernel1D(self.family, lengthscale, self.alpha)

    def to_dict(self) -> dict:
        d = {"family": self.family}
        if self.family == "cosine":
            d["alpha"] = self.alpha
        else:
            d["lengthscale"] = self.lengthscale
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ContinuousKernel1D":
        return cls(d.get("family", "matern52"), float(d.get("lengthscale", 0.2)), float(d.get("alpha", math.pi)))


def eval_continuous(kernel: ContinuousKernel1D, x, xp):
    return kernel(x, xp)
