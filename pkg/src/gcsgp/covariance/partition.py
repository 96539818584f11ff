"""Partitions of categorical levels into contiguous groups."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..exceptions import DomainError


@dataclass(frozen=True)
class GroupPartition:
    """Levels ``1..L`` split into consecutive groups of sizes ``n_1, ..., n_G``.

    Group 1 holds levels ``1..n_1``, group 2 the next ``n_2`` levels, and so on.
    Arbitrary level-to-group assignments go through :class:`Relabeling`.
    """

    group_sizes: tuple[int, ...]

    def __init__(self, group_sizes: Sequence[int]):
        sizes = tuple(int(n) for n in group_sizes)
        if len(sizes) == 0:
            raise DomainError("a partition needs at least one group")
        if any(n < 1 for n in sizes):
            raise DomainError(f"group sizes must be positive, got {sizes}")
        object.__setattr__(self, "group_sizes", sizes)

    @classmethod
    def single(cls, level_count: int) -> "GroupPartition":
        return cls([level_count])

    @classmethod
    def singletons(cls, level_count: int) -> "GroupPartition":
        return cls([1] * level_count)

    @property
    def level_count(self) -> int:
        return sum(self.group_sizes)

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.group_sizes)]).astype(int)

    def slices(self) -> list[slice]:
        off = self.offsets
        return [slice(int(off[g]), int(off[g + 1])) for g in range(self.n_groups)]

    def group_of(self) -> np.ndarray:
        """0-based group index of every level (0-based level order)."""
        return np.repeat(np.arange(self.n_groups), self.group_sizes)

    def membership(self) -> np.ndarray:
        """The ``L x G`` indicator matrix with block columns of ones."""
        X = np.zeros((self.level_count, self.n_groups))
        X[np.arange(self.level_count), self.group_of()] = 1.0
        return X

    def to_dict(self) -> dict:
        return {"group_sizes": list(self.group_sizes)}


@dataclass(frozen=True)
class Relabeling:
    """Map between user level labels ``1..L`` and the canonical grouped order.

    ``order[k]`` is the original (1-based) level placed at canonical position
    ``k``. Levels keep their relative order inside each group.
    """

    partition: GroupPartition
    order: tuple[int, ...]

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[int]]) -> "Relabeling":
        """Build from explicit groups of 1-based levels, e.g. ``[[1, 3], [2, 4, 5]]``."""
        flat = [int(level) for grp in groups for level in grp]
        L = len(flat)
        if sorted(flat) != list(range(1, L + 1)):
            raise DomainError(f"groups must cover levels 1..{L} exactly once, got {groups}")
        sizes = [len(grp) for grp in groups]
        order = [level for grp in groups for level in sorted(int(x) for x in grp)]
        return cls(GroupPartition(sizes), tuple(order))

    @classmethod
    def from_assignment(cls, assignment: Sequence[int]) -> "Relabeling":
        """Build from a per-level group id list (``assignment[l-1]`` = group of level l).

        Groups are numbered by order of first appearance.
        """
        ids: dict[int, list[int]] = {}
        for level, gid in enumerate(assignment, start=1):
            ids.setdefault(gid, []).append(level)
        return cls.from_groups(list(ids.values()))

    @property
    def is_identity(self) -> bool:
        return self.order == tuple(range(1, len(self.order) + 1))

    def inverse(self) -> np.ndarray:
        """``inverse()[l-1]`` is the 0-based canonical position of original level l."""
        inv = np.empty(len(self.order), dtype=int)
        inv[np.asarray(self.order) - 1] = np.arange(len(self.order))
        return inv

    def to_canonical(self, levels) -> np.ndarray:
        """Original 1-based levels -> canonical 1-based levels."""
        return self.inverse()[np.asarray(levels, dtype=int) - 1] + 1

    def from_canonical(self, levels) -> np.ndarray:
        return np.asarray(self.order)[np.asarray(levels, dtype=int) - 1]

    def matrix_to_original(self, T: np.ndarray) -> np.ndarray:
        """Reorder a canonical-order matrix so rows/columns follow original levels."""
        inv = self.inverse()
        return T[np.ix_(inv, inv)]

    def matrix_to_canonical(self, T: np.ndarray) -> np.ndarray:
        idx = np.asarray(self.order) - 1
        return T[np.ix_(idx, idx)]

    def groups(self) -> list[list[int]]:
        return [list(self.order[s]) for s in self.partition.slices()]
