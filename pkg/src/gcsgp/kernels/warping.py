"""Non-decreasing maps from ordered levels to positions on the real line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..exceptions import DomainError

KINDS = ("piecewise_linear", "normal_cdf")


@dataclass(frozen=True)
class Warping:
    """Warping ``F`` of levels ``1..L``; ``F(1) = 0`` for both kinds.

    piecewise_linear
        ``F(l) = increments[0] + ... + increments[l-2]`` (``L - 1`` non-negative increments).
    normal_cdf
        ``F(l) = span * (Phi(z_l) - Phi(z_1)) / (Phi(z_L) - Phi(z_1))`` with
        ``z_l = (l - location) / scale``.
    """

    kind: str
    level_count: int
    increments: tuple = ()
    location: float = 0.0
    scale: float = 1.0
    span: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown warping kind {self.kind!r}")
        if self.level_count < 1:
            raise DomainError("level count must be positive")
        if self.kind == "piecewise_linear":
            inc = tuple(float(x) for x in self.increments)
            if len(inc) != self.level_count - 1:
                raise DomainError(f"expected {self.level_count - 1} increments, got {len(inc)}")
            if any(x < 0 for x in inc):
                raise DomainError(f"warping increments must be non-negative, got {inc}")
            object.__setattr__(self, "increments", inc)
        else:
            if not self.scale > 0:
                raise DomainError(f"normal_cdf scale must be positive, got {self.scale}")
            if not self.span > 0:
                raise DomainError(f"normal_cdf span must be positive, got {self.span}")

    @classmethod
    def equally_spaced(cls, level_count: int, total: float = 1.0) -> "Warping":
        step = total / max(level_count - 1, 1)
        return cls("piecewise_linear", level_count, (step,) * (level_count - 1))

    def to_dict(self) -> dict:
        if self.kind == "piecewise_linear":
            return {"kind": self.kind, "level_count": self.level_count, "increments": list(self.increments)}
        return {
            "kind": self.kind,
            "level_count": self.level_count,
            "location": self.location,
            "scale": self.scale,
            "span": self.span,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Warping":
        return cls(
            d["kind"],
            int(d["level_count"]),
            tuple(d.get("increments", ())),
            float(d.get("location", 0.0)),
            float(d.get("scale", 1.0)),
            float(d.get("span", 1.0)),
        )


def warp_positions(w: Warping) -> np.ndarray:
    L = w.level_count
    if w.kind == "piecewise_linear":
        return np.concatenate([[0.0], np.cumsum(w.increments)])
    if L == 1:
        return np.zeros(1)
    p = ndtr((np.arange(1, L + 1) - w.location) / w.scale)
    denom = p[-1] - p[0]
    if not denom > 0:
        raise DomainError(
            f"normal_cdf warping is degenerate (location={w.location}, scale={w.scale})"
        )
    return w.span * (p - p[0]) / denom
