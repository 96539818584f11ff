"""Spherical parameterization of Cholesky factors.

Column ``j`` of the upper factor ``U`` (so that ``T = U^T U``) is a point of
norm ``sd_j`` written in spherical coordinates with ``j`` angles. The
returned lower-triangular ``L = U^T`` satisfies ``T = L L^T``; rows of ``L``
carry the prescribed norms, so ``T_jj = sd_j**2`` and all angles equal to
``pi/2`` give a diagonal matrix.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..exceptions import DomainError


@lru_cache(maxsize=64)
def _strict_lower(L: int):
    return np.tril_indices(L, -1)


def n_angles(level_count: int) -> int:
    return level_count * (level_count - 1) // 2


def spherical_to_cholesky(variance, angles) -> np.ndarray:
    """Lower-triangular factor from one variance (or one per level) and ``L(L-1)/2`` angles.

    Angles are consumed level by level: level 2 uses one angle, level 3 the
    next two, and so on.
    """
    angles = np.asarray(angles, dtype=float).ravel()
    var = np.atleast_1d(np.asarray(variance, dtype=float))
    # recover L from the angle count
    L = int(round((1 + np.sqrt(1 + 8 * angles.size)) / 2))
    if n_angles(L) != angles.size:
        raise DomainError(f"{angles.size} angles is not L(L-1)/2 for any integer L")
    if var.size == 1:
        var = np.full(L, var[0])
    if var.size != L:
        raise DomainError(f"expected 1 or {L} variances, got {var.size}")
    if np.any(var <= 0):
        raise DomainError("variances must be positive")
    sd = np.sqrt(var)
    # tril_indices enumerates rows in order, so row i receives the next i angles
    rows, cols = _strict_lower(L)
    S = np.ones((L, L))
    C = np.eye(L)
    S[rows, cols] = np.sin(angles)
    C[rows, cols] = np.cos(angles)
    # P[i, j] = prod_{k<j} sin(theta_ik)
    P = np.ones((L, L))
    P[:, 1:] = np.cumprod(S[:, :-1], axis=1)
    F = P * C
    return sd[:, None] * F


def cholesky_to_spherical(T) -> tuple[np.ndarray, np.ndarray]:
    """Inverse map for a PD matrix: ``(variances, angles)``."""
    T = np.asarray(T, dtype=float)
    Lc = np.linalg.cholesky(T)
    sd = np.sqrt(np.diag(T))
    F = Lc / sd[:, None]
    angles = []
    for i in range(1, T.shape[0]):
        row = F[i, : i + 1]
        rem = 1.0
        for k in range(i):
            c = np.clip(row[k] / rem if rem > 0 else 1.0, -1.0, 1.0)
            th = np.arccos(c)
            angles.append(th)
            rem *= np.sin(th)
    return sd**2, np.asarray(angles)
