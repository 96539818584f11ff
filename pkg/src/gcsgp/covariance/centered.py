"""Centered covariance matrices and their contrast-basis parameterization.

A covariance matrix is *centered* when the grand mean of its entries is zero,
i.e. it annihilates the vector of ones. Every such ``n x n`` matrix is written
uniquely as ``A M A^T`` with ``A`` an orthonormal basis of the complement of
ones and ``M`` an ``(n-1) x (n-1)`` covariance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..exceptions import DomainError


def _centered_tol(S: np.ndarray) -> float:
    return 1e-12 * max(1.0, float(np.abs(S).max(initial=0.0)))


@dataclass(frozen=True, eq=False)
class ContrastBasis:
    """``n x (n-1)`` matrix with orthonormal columns orthogonal to ones."""

    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class CenteredCovariance:
    matrix: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.matrix, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DomainError(f"centered covariance must be square, got shape {S.shape}")
        object.__setattr__(self, "matrix", S)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def grand_mean(self) -> float:
        return float(self.matrix.mean()) if self.matrix.size else 0.0

    def is_centered(self) -> bool:
        return abs(self.grand_mean) <= _centered_tol(self.matrix)


@lru_cache(maxsize=128)
def _helmert(n: int) -> np.ndarray:
    H = np.zeros((n, n - 1))
    for k in range(1, n):
        # column k: -1 on the first k rows, k on row k
        H[:k, k - 1] = -1.0
        H[k, k - 1] = float(k)
        H[:, k - 1] /= np.sqrt(k * (k + 1.0))
    H.setflags(write=False)
    return H


def helmert_basis(n: int) -> ContrastBasis:
    """Normalized Helmert contrasts for ``n >= 2`` levels."""
    if int(n) < 2:
        raise DomainError(f"a contrast basis needs n >= 2, got {n}")
    return ContrastBasis(_helmert(int(n)))


def centered_from_reduced(M, basis: ContrastBasis) -> CenteredCovariance:
    M = np.asarray(M, dtype=float)
    A = basis.matrix
    if M.shape != (A.shape[1], A.shape[1]):
        raise DomainError(f"reduced matrix must be {A.shape[1]}x{A.shape[1]}, got {M.shape}")
    S = A @ M @ A.T
    return CenteredCovariance(0.5 * (S + S.T))


def reduced_from_centered(sigma: CenteredCovariance, basis: ContrastBasis) -> np.ndarray:
    S = sigma.matrix if isinstance(sigma, CenteredCovariance) else np.asarray(sigma, dtype=float)
    A = basis.matrix
    if S.shape != (A.shape[0], A.shape[0]):
        raise DomainError(f"covariance must be {A.shape[0]}x{A.shape[0]}, got {S.shape}")
    if abs(S.mean()) > _centered_tol(S):
        raise DomainError(f"matrix is not centered (grand mean {S.mean():.3e})")
    M = A.T @ S @ A
    return 0.5 * (M + M.T)
