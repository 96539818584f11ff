"""Generalized compound symmetry (GCS) block covariance matrices.

A block matrix over grouped levels is GCS when its off-diagonal blocks are
constant and every diagonal block stays positive semidefinite after removing
its grand mean. Such a matrix decomposes as::

    T = X T~ X^T + blockdiag(W_g - mean(W_g) J)

where ``X`` is the level/group membership matrix and ``T~`` the ``G x G``
matrix of block averages. Consequently ``T`` is PSD iff ``T~`` is, and it is
PD iff ``T~`` and every ``W_g`` are PD.

Valid GCS matrices are generated from a between-group covariance ``B*`` and
reduced within-group matrices ``M_g`` of size ``n_g - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..exceptions import DomainError, InvalidParamsError
from .centered import centered_from_reduced, helmert_basis, reduced_from_centered
from .partition import GroupPartition

PSD_RTOL = 1e-10


def psd_tolerance(A: np.ndarray) -> float:
    """Eigenvalue threshold ``1e-10 * max(1, trace)`` used for all (semi)definiteness tests."""
    return PSD_RTOL * max(1.0, float(np.trace(A))) if A.size else PSD_RTOL


def min_eigenvalue(A: np.ndarray) -> float:
    if A.size == 0:
        return np.inf
    A = np.asarray(A, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def is_psd(A: np.ndarray) -> bool:
    return min_eigenvalue(A) >= -psd_tolerance(A)


def is_pd(A: np.ndarray) -> bool:
    return min_eigenvalue(A) > psd_tolerance(A)


@dataclass(frozen=True, eq=False)
class GCSParams:
    """Generator of a GCS matrix: between-group ``B*`` and reduced within ``M_g``."""

    partition: GroupPartition
    between: np.ndarray
    within_reduced: tuple[np.ndarray, ...]

    def __post_init__(self):
        G = self.partition.n_groups
        B = np.atleast_2d(np.asarray(self.between, dtype=float))
        if B.shape != (G, G):
            raise DomainError(f"between matrix must be {G}x{G}, got {B.shape}")
        if len(self.within_reduced) != G:
            raise DomainError(f"expected {G} within matrices, got {len(self.within_reduced)}")
        Ms = []
        for g, (n, M) in enumerate(zip(self.partition.group_sizes, self.within_reduced)):
            M = np.asarray(M, dtype=float)
            if M.size != (n - 1) ** 2:
                raise DomainError(f"within matrix of group {g + 1} must be {n - 1}x{n - 1}")
            Ms.append(M.reshape(n - 1, n - 1))
        object.__setattr__(self, "between", B)
        object.__setattr__(self, "within_reduced", tuple(Ms))

    def check(self) -> None:
        """Raise :class:`InvalidParamsError` unless ``B*`` and every ``M_g`` are symmetric PSD."""
        for name, A in [("between", self.between)] + [
            (f"within[{g + 1}]", M) for g, M in enumerate(self.within_reduced)
        ]:
            if A.size == 0:
                continue
            if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
                raise InvalidParamsError(f"{name} generator is not symmetric")
            lam = min_eigenvalue(A)
            if lam < -psd_tolerance(A):
                raise InvalidParamsError(f"{name} generator is not PSD (min eigenvalue {lam:.3e})")


@dataclass(frozen=True, eq=False)
class BlockCovariance:
    partition: GroupPartition
    matrix: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.matrix, dtype=float)
        L = self.partition.level_count
        if T.shape != (L, L):
            raise DomainError(f"matrix must be {L}x{L} for this partition, got {T.shape}")
        object.__setattr__(self, "matrix", T)

    def within(self, g: int) -> np.ndarray:
        s = self.partition.slices()[g]
        return self.matrix[s, s]

    def between_block(self, g: int, h: int) -> np.ndarray:
        sl = self.partition.slices()
        return self.matrix[sl[g], sl[h]]


@dataclass
class ValidationReport:
    is_gcs: bool
    is_psd: bool
    is_pd: bool
    t_tilde: np.ndarray
    failing_checks: list[str] = field(default_factory=list)
    diagonal_spread: float = 0.0
    min_eigenvalue_t_tilde: float = np.nan

    @property
    def ok(self) -> bool:
        return self.is_gcs and self.is_psd

    def to_dict(self) -> dict:
        return {
            "is_gcs": self.is_gcs,
            "is_psd": self.is_psd,
            "is_pd": self.is_pd,
            "t_tilde": np.asarray(self.t_tilde).tolist(),
            "min_eigenvalue_t_tilde": float(self.min_eigenvalue_t_tilde),
            "diagonal_spread": float(self.diagonal_spread),
            "failing_checks": list(self.failing_checks),
        }


def _centered_within(params: GCSParams) -> list[np.ndarray]:
    out = []
    for n, M in zip(params.partition.group_sizes, params.within_reduced):
        if n == 1:
            out.append(np.zeros((1, 1)))
        else:
            out.append(centered_from_reduced(M, helmert_basis(n)).matrix)
    return out


def gcs_assemble(params: GCSParams) -> BlockCovariance:
    """Assemble ``T`` with ``W_g = B*_gg J + A_g M_g A_g^T`` and ``B_gh = B*_gh J``."""
    params.check()
    part = params.partition
    X = part.membership()
    T = X @ params.between @ X.T
    for s, S in zip(part.slices(), _centered_within(params)):
        T[s, s] += S
    return BlockCovariance(part, 0.5 * (T + T.T))


def block_average(T: BlockCovariance | np.ndarray, partition: GroupPartition | None = None) -> np.ndarray:
    if isinstance(T, BlockCovariance):
        partition, T = T.partition, T.matrix
    if partition is None:
        raise DomainError("a partition is required to average blocks")
    T = np.asarray(T, dtype=float)
    if T.shape != (partition.level_count,) * 2:
        raise DomainError(f"matrix shape {T.shape} inconsistent with {partition.level_count} levels")
    X = partition.membership()
    n = np.asarray(partition.group_sizes, dtype=float)
    Tt = (X.T @ T @ X) / np.outer(n, n)
    return 0.5 * (Tt + Tt.T)


def gcs_validate(T, partition: GroupPartition) -> ValidationReport:
    """Check the GCS structure of ``T`` and decide (semi)definiteness via the block averages.

    The eigenvalue threshold for the block-averaged matrix is
    ``1e-10 * max(1, trace(T))``, i.e. relative to the matrix being validated.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DomainError(f"matrix must be square, got shape {T.shape}")
    if T.shape[0] != partition.level_count:
        raise DomainError(f"matrix size {T.shape[0]} != level count {partition.level_count}")
    scale = max(1.0, float(np.abs(T).max(initial=0.0)))
    if not np.allclose(T, T.T, rtol=0.0, atol=1e-12 * scale):
        raise DomainError("matrix is not symmetric")
    T = 0.5 * (T + T.T)
    atol = 1e-10 * scale
    failing: list[str] = []
    sl = partition.slices()
    G = partition.n_groups

    for g in range(G):
        for h in range(g + 1, G):
            blk = T[sl[g], sl[h]]
            if np.ptp(blk) > atol:
                failing.append(f"between block ({g + 1},{h + 1}) is not constant (spread {np.ptp(blk):.3e})")
    within_pd = True
    for g in range(G):
        W = T[sl[g], sl[g]]
        centered = W - W.mean()
        lam = min_eigenvalue(centered)
        if lam < -psd_tolerance(centered):
            failing.append(
                f"within block {g + 1} minus its mean is not PSD (min eigenvalue {lam:.3e})"
            )
        if not is_pd(W):
            within_pd = False
    is_gcs = not failing

    Tt = block_average(T, partition)
    lam_tt = min_eigenvalue(Tt)
    if is_gcs:
        # Averaging cancels the centred within parts, leaving rounding error
        # proportional to the entries of T, so the threshold scales with T.
        tol = psd_tolerance(T)
        psd = lam_tt >= -tol
        pd = lam_tt > tol and within_pd
        if not psd:
            failing.append(f"block-averaged matrix is not PSD (min eigenvalue {lam_tt:.3e})")
        elif not pd:
            failing.append("matrix is PSD but singular")
    else:
        # the block-average criterion only applies to GCS matrices
        lam = min_eigenvalue(T)
        psd = lam >= -psd_tolerance(T)
        pd = lam > psd_tolerance(T)
        if not psd:
            failing.append(f"matrix is not PSD (min eigenvalue {lam:.3e})")
    diag = np.diag(T)
    return ValidationReport(
        is_gcs=is_gcs,
        is_psd=bool(psd),
        is_pd=bool(pd),
        t_tilde=Tt,
        failing_checks=failing,
        diagonal_spread=float(np.ptp(diag)) if diag.size else 0.0,
        min_eigenvalue_t_tilde=lam_tt,
    )


def gcs_decompose(T: BlockCovariance) -> GCSParams:
    """Recover the generator ``(B*, M_g)`` of a PSD GCS matrix."""
    report = gcs_validate(T.matrix, T.partition)
    if not (report.is_gcs and report.is_psd):
        raise DomainError("matrix is not a PSD GCS matrix: " + "; ".join(report.failing_checks))
    Ms = []
    for g, n in enumerate(T.partition.group_sizes):
        if n == 1:
            Ms.append(np.zeros((0, 0)))
            continue
        W = T.within(g)
        Ms.append(reduced_from_centered(W - W.mean(), helmert_basis(n)))
    return GCSParams(T.partition, report.t_tilde, tuple(Ms))


def gcs_identity_check(params: GCSParams) -> float:
    """Max-abs residual of ``T - [X T~ X^T + blockdiag(W_g - mean(W_g) J)]``."""
    blk = gcs_assemble(params)
    T = blk.matrix
    part = params.partition
    X = part.membership()
    R = X @ block_average(blk) @ X.T
    for s in part.slices():
        W = T[s, s]
        R[s, s] += W - W.mean()
    return float(np.abs(T - R).max())


def gcs_is_invertible(params: GCSParams) -> bool:
    """``T`` is invertible iff ``B*`` and every reduced ``M_g`` are."""
    params.check()
    mats = [params.between] + [M for M in params.within_reduced if M.size]
    return all(is_pd(A) for A in mats)


def parameter_count(within: str, between: str, partition: GroupPartition | Sequence[int]) -> int:
    """Number of parameters of the categorical kernel for the four standard settings.

    ``within`` / ``between`` are ``"cs"`` or ``"general"``.
    """
    if not isinstance(partition, GroupPartition):
        partition = GroupPartition(partition)
    G = partition.n_groups
    general_within = sum(n * (n + 1) // 2 for n in partition.group_sizes)
    table = {
        ("cs", "cs"): 2 * G + 1,
        ("cs", "general"): G * (G + 3) // 2,
        ("general", "cs"): 2 + general_within,
        ("general", "general"): G * (G + 1) // 2 + general_within,
    }
    try:
        return table[(within, between)]
    except KeyError:
        raise DomainError(f"unknown scheme within={within!r}, between={between!r}") from None
