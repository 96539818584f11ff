"""Designs of experiments on ``[0,1]^I x {1..L}``.

* :func:`slhd` — sliced Latin hypercube: each level's slice is a Latin
  hypercube on the coarse ``m``-grid and the union is one on the fine
  ``mL``-grid.
* :func:`stratified_regular` — deterministic: ``mL`` regularly spaced points
  dealt to the levels in round-robin order.
* :func:`lhs`, :func:`grid` — designs for continuous inputs only.

Points are placed at bin centres unless ``jitter=True``, in which case they
are uniform within their bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, InputSchema, write_csv
from .exceptions import DomainError


@dataclass(frozen=True, eq=False)
class Design:
    """A point set ``(X, U)``; ``U`` is empty (``N x 0``) for purely continuous designs."""

    X: np.ndarray
    U: np.ndarray
    provenance: str
    seed: int | None = None
    level_counts: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        U = np.asarray(self.U, dtype=int).reshape(X.shape[0], -1)
        if X.size and (X.min() < 0 or X.max() > 1):
            raise DomainError("design coordinates must lie in [0, 1]")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def counts_per_level(self, column: int = 0) -> dict[int, int]:
        levels, counts = np.unique(self.U[:, column], return_counts=True)
        return {int(l): int(c) for l, c in zip(levels, counts)}

    def to_dataset(self, schema: InputSchema, y=None) -> Dataset:
        return Dataset(schema, self.X, self.U, y)

    def write_csv(self, path, schema: InputSchema) -> None:
        write_csv(path, schema, self.X, self.U)


def _place(bins: np.ndarray, n_bins: int, rng: np.random.Generator | None) -> np.ndarray:
    """Map 0-based bin indices to coordinates: centres, or uniform within the bin."""
    offset = 0.5 if rng is None else rng.uniform(size=bins.shape)
    return (bins + offset) / n_bins


def _check_positive(**kw):
    for name, v in kw.items():
        if int(v) != v or v < 1:
            raise DomainError(f"{name} must be a positive integer, got {v!r}")


def _levels_grid(level_counts: Sequence[int]) -> np.ndarray:
    """All level combinations, row-major, as 1-based integers (``prod L_j x J``)."""
    axes = [np.arange(1, L + 1) for L in level_counts]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=1)


def _normalize_levels(L) -> tuple[int, ...]:
    counts = (int(L),) if np.isscalar(L) else tuple(int(v) for v in L)
    if not counts:
        raise DomainError("at least one categorical input is required")
    for v in counts:
        _check_positive(level_count=v)
    return counts


def slhd(m: int, L: int | Sequence[int], I: int, seed: int | None = None, jitter: bool = False) -> Design:
    """Sliced Latin hypercube with ``m`` points per slice.

    ``L`` may be a sequence of level counts, in which case slices are the
    cells of the full cross-product of levels.

    Construction, for each dimension independently: the fine grid of ``mL``
    bins is cut into ``m`` coarse bins of ``L`` fine bins each. In every
    coarse bin a random permutation hands one fine bin to each slice, so
    every fine bin is used exactly once; then each slice assigns its ``m``
    coarse bins to its ``m`` points in random order.
    """
    counts = _normalize_levels(L)
    _check_positive(m=m, I=I)
    n_slices = math.prod(counts)
    rng = np.random.default_rng(seed)
    n = m * n_slices
    X = np.empty((n, I))
    for d in range(I):
        # fine[s, i]: fine bin used by slice s inside coarse bin i
        fine = np.stack([rng.permutation(n_slices) for _ in range(m)], axis=1) + n_slices * np.arange(m)
        for s in range(n_slices):
            order = rng.permutation(m)
            X[s * m:(s + 1) * m, d] = _place(fine[s, order], n, rng if jitter else None)
    U = np.repeat(_levels_grid(counts), m, axis=0)
    return Design(X, U, "slhd", seed, counts, {"points_per_level": m, "jitter": jitter})


def _coprime_multipliers(N: int, k: int) -> list[int]:
    out, g = [1], 2
    while len(out) < k:
        if N <= 2 or g >= N:
            out.append(1)
            continue
        if math.gcd(g, N) == 1:
            out.append(g)
        g += 1
    return out


def stratified_regular(m: int, L: int | Sequence[int], I: int = 1) -> Design:
    """Regular sequence of ``mL`` points in ``[0, 1]`` dealt to levels round-robin.

    Point ``i`` (0-based) of ``linspace(0, 1, mL)`` goes to level ``(i mod L) + 1``,
    so every level receives ``m`` distinct, interleaved values. For ``I > 1``,
    dimension ``d`` uses the rank-1 lattice permutation ``i -> i * g_d mod mL``
    of the same sequence with ``g_d`` coprime to ``mL``.
    """
    counts = _normalize_levels(L)
    _check_positive(m=m, I=I)
    n_slices = math.prod(counts)
    N = m * n_slices
    seq = np.linspace(0.0, 1.0, N) if N > 1 else np.array([0.5])
    idx = np.arange(N)
    X = np.stack([seq[(idx * g) % N] for g in _coprime_multipliers(N, I)], axis=1)
    U = _levels_grid(counts)[idx % n_slices]
    order = np.lexsort((X[:, 0], idx % n_slices))
    return Design(X[order], U[order], "stratified", None, counts, {"points_per_level": m})


def lhs(n: int, I: int, seed: int | None = None, jitter: bool = False) -> Design:
    """Latin hypercube of ``n`` points: each axis has exactly one point per ``1/n`` bin."""
    _check_positive(n=n, I=I)
    rng = np.random.default_rng(seed)
    X = np.stack([_place(rng.permutation(n), n, rng if jitter else None) for _ in range(I)], axis=1)
    return Design(X, np.zeros((n, 0), int), "lhs", seed)


def grid(n: int, I: int = 1) -> Design:
    """Regular lattice with ``n`` points per axis (``n**I`` points), end points included."""
    _check_positive(n=n, I=I)
    axis = np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.5])
    mesh = np.meshgrid(*([axis] * I), indexing="ij")
    X = np.stack([a.ravel() for a in mesh], axis=1)
    return Design(X, np.zeros((X.shape[0], 0), int), "grid")


def cross_levels(design: Design, level_counts: Sequence[int]) -> Design:
    """Repeat a continuous design at every level combination (e.g. a test grid)."""
    levels = _levels_grid(level_counts)
    X = np.tile(design.X, (levels.shape[0], 1))
    U = np.repeat(levels, design.n, axis=0)
    return Design(X, U, design.provenance, design.seed, tuple(level_counts), dict(design.meta))
