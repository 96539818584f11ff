"""Compound symmetry (exchangeable) covariance matrices.

A CS matrix of size L has one common variance ``v`` on the diagonal and one
common covariance ``c`` elsewhere. It is positive definite iff
``-v/(L-1) < c < v``; its spectrum is ``v + (L-1) c`` (eigenvector of ones)
and ``v - c`` with multiplicity ``L - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DomainError, InvalidSpecError


@dataclass(frozen=True)
class CSSpec:
    size: int
    variance: float
    covariance: float

    def __post_init__(self):
        if int(self.size) < 1:
            raise DomainError(f"CS size must be >= 1, got {self.size}")

    @property
    def correlation(self) -> float:
        return self.covariance / self.variance

    @property
    def is_valid(self) -> bool:
        return self.variance > 0 and cs_is_positive_definite(self)

    def eigenvalues(self) -> tuple[float, float]:
        """(eigenvalue along ones, eigenvalue on its orthogonal complement)."""
        return (self.variance + (self.size - 1) * self.covariance, self.variance - self.covariance)


def cs_matrix(spec: CSSpec) -> np.ndarray:
    L = spec.size
    return (spec.variance - spec.covariance) * np.eye(L) + spec.covariance * np.ones((L, L))


def cs_is_positive_definite(spec: CSSpec) -> bool:
    if not spec.variance > 0:
        raise InvalidSpecError(f"CS variance must be positive, got {spec.variance}")
    v, c, L = spec.variance, spec.covariance, spec.size
    if L == 1:
        return True
    return -v / (L - 1) < c < v


def cs_is_positive_semidefinite(spec: CSSpec) -> bool:
    v, c, L = spec.variance, spec.covariance, spec.size
    if v < 0:
        return False
    if L == 1:
        return True
    return -v / (L - 1) <= c <= v


def cs_from_hierarchical(level_count: int, v_mu: float, v_lambda: float) -> CSSpec:
    """CS matrix of ``eta_l = mu + lambda_l`` conditioned on zero mean level effects.

    ``v_mu`` is the variance of the common effect, ``v_lambda`` the variance of
    the level effects. Negative covariances arise when ``v_lambda / L > v_mu``.
    """
    L = int(level_count)
    if L < 2:
        raise DomainError(f"hierarchical CS representation needs L >= 2, got {L}")
    if v_mu < 0 or v_lambda < 0:
        raise DomainError(f"variances must be non-negative, got v_mu={v_mu}, v_lambda={v_lambda}")
    if v_mu == 0 and v_lambda == 0:
        raise DomainError("v_mu and v_lambda cannot both be zero")
    return CSSpec(L, v_mu + v_lambda * (1.0 - 1.0 / L), v_mu - v_lambda / L)


def hierarchical_from_cs(spec: CSSpec) -> tuple[float, float]:
    """Inverse of :func:`cs_from_hierarchical`; returns ``(v_mu, v_lambda)``."""
    if spec.size < 2:
        raise DomainError("hierarchical CS representation needs L >= 2")
    if not cs_is_positive_definite(spec):
        raise DomainError(
            f"CS matrix (v={spec.variance}, c={spec.covariance}, L={spec.size}) is not positive definite"
        )
    L = spec.size
    v, c = spec.variance, spec.covariance
    return v / L + c * (1.0 - 1.0 / L), v - c
