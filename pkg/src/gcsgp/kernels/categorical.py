"""Kernels for a single categorical input, i.e. ``L x L`` covariance matrices.

Every kernel materializes its matrix once at construction and exposes an
unconstrained parameter vector through ``pack``/``unpack``. Matrices are
indexed by the original (1-based) level labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Sequence

import numpy as np

from ..covariance import (
    GroupPartition,
    Relabeling,
    cs_from_hierarchical,
    cs_matrix,
    hierarchical_from_cs,
    helmert_basis,
    min_eigenvalue,
    psd_tolerance,
    spherical_to_cholesky,
)
from ..exceptions import DomainError
from . import params as P
from .continuous import ContinuousKernel1D
from .warping import Warping, warp_positions

_REGISTRY: dict[str, type] = {}


def _register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


class CategoricalKernel:
    kind: ClassVar[str] = ""

    @property
    def level_count(self) -> int:
        return self.matrix.shape[0]

    def param_specs(self) -> list[P.ParamSpec]:
        raise NotImplementedError

    @cached_property
    def n_params(self) -> int:
        return len(self.param_specs())

    def pack(self) -> np.ndarray:
        raise NotImplementedError

    def unpack(self, vec) -> "CategoricalKernel":
        raise NotImplementedError

    def is_valid(self) -> bool:
        return True

    def correlation(self) -> np.ndarray:
        sd = np.sqrt(np.diag(self.matrix))
        return self.matrix / np.outer(sd, sd)

    def to_dict(self) -> dict:
        raise NotImplementedError


def categorical_from_dict(d: dict) -> CategoricalKernel:
    try:
        cls = _REGISTRY[d["type"]]
    except KeyError:
        raise DomainError(f"unknown categorical kernel type {d.get('type')!r}") from None
    return cls.from_dict(d)


# --------------------------------------------------------------------- CS


@_register
@dataclass(frozen=True, eq=False)
class CSKernel(CategoricalKernel):
    """Compound symmetry parameterized by the hierarchical variances ``(v_mu, v_lambda)``."""

    kind: ClassVar[str] = "cs"
    levels: int
    v_mu: float = 0.5
    v_lambda: float = 0.5
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", cs_matrix(cs_from_hierarchical(self.levels, self.v_mu, self.v_lambda)))

    @classmethod
    def from_cs(cls, levels: int, variance: float, covariance: float) -> "CSKernel":
        from ..covariance import CSSpec

        v_mu, v_lambda = hierarchical_from_cs(CSSpec(levels, variance, covariance))
        return cls(levels, v_mu, v_lambda)

    @property
    def variance(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def covariance(self) -> float:
        return float(self.matrix[0, 1])

    def param_specs(self):
        return [P.log_variance("v_mu"), P.log_variance("v_lambda")]

    def pack(self):
        if self.v_mu <= 0 or self.v_lambda <= 0:
            raise DomainError("CS kernel on the PSD boundary has no unconstrained representation")
        return np.log([self.v_mu, self.v_lambda])

    def unpack(self, vec):
        vec = P.check_finite(vec)
        return CSKernel(self.levels, float(np.exp(vec[0])), float(np.exp(vec[1])))

    def to_dict(self):
        return {"type": self.kind, "levels": self.levels, "v_mu": self.v_mu, "v_lambda": self.v_lambda}

    @classmethod
    def from_dict(cls, d):
        if "variance" in d:
            return cls.from_cs(int(d["levels"]), float(d["variance"]), float(d["covariance"]))
        return cls(int(d["levels"]), float(d.get("v_mu", 0.5)), float(d.get("v_lambda", 0.5)))


# -------------------------------------------------------------------- GCS

SCHEMES = ("cs", "general")


def _groups_to_relabeling(groups) -> Relabeling:
    groups = list(groups)
    if all(isinstance(g, (int, np.integer)) for g in groups):
        part = GroupPartition(groups)
        return Relabeling(part, tuple(range(1, part.level_count + 1)))
    return Relabeling.from_groups(groups)


@_register
@dataclass(frozen=True, eq=False)
class GCSKernel(CategoricalKernel):
    """Block covariance generated by ``B*`` and reduced within-group matrices ``M_g``.

    ``between`` is ``"cs"`` (common between-group covariance) or ``"general"``;
    ``within`` holds one scheme per group, ``"cs"`` meaning ``M_g = v_g I``.
    The assembled matrix is PSD for every parameter value.
    """

    kind: ClassVar[str] = "gcs"
    relabel: Relabeling
    between: np.ndarray
    within_reduced: tuple
    between_scheme: str = "general"
    within_schemes: tuple = ()
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        part = self.partition
        G = part.n_groups
        B = np.atleast_2d(np.asarray(self.between, dtype=float))
        if B.shape != (G, G):
            raise DomainError(f"between matrix must be {G}x{G}")
        schemes = tuple(self.within_schemes) or ("cs",) * G
        if len(schemes) != G or any(s not in SCHEMES for s in schemes):
            raise DomainError(f"within schemes must be {G} of {SCHEMES}, got {schemes}")
        if self.between_scheme not in SCHEMES:
            raise DomainError(f"between scheme must be one of {SCHEMES}")
        Ms = []
        for g, n in enumerate(part.group_sizes):
            M = np.asarray(self.within_reduced[g], dtype=float).reshape(n - 1, n - 1)
            if schemes[g] == "cs" and n > 1 and not np.allclose(M, M[0, 0] * np.eye(n - 1)):
                raise DomainError(f"group {g + 1} uses the cs scheme but M_g is not a multiple of identity")
            Ms.append(M)
        if self.between_scheme == "cs" and G > 1:
            off = B[~np.eye(G, dtype=bool)]
            if np.ptp(np.diag(B)) > 1e-12 * max(1, abs(B).max()) or np.ptp(off) > 1e-12 * max(1, abs(B).max()):
                raise DomainError("between scheme 'cs' requires a compound-symmetric B*")
        object.__setattr__(self, "between", B)
        object.__setattr__(self, "within_reduced", tuple(Ms))
        object.__setattr__(self, "within_schemes", schemes)

        X = part.membership()
        T = X @ B @ X.T
        for s, n, M in zip(part.slices(), part.group_sizes, Ms):
            if n > 1:
                A = helmert_basis(n).matrix
                T[s, s] += A @ M @ A.T
        T = 0.5 * (T + T.T)
        if not self.relabel.is_identity:
            T = self.relabel.matrix_to_original(T)
        object.__setattr__(self, "matrix", T)

    @property
    def partition(self) -> GroupPartition:
        return self.relabel.partition

    @classmethod
    def create(
        cls,
        groups: Sequence,
        within: str | Sequence[str] = "cs",
        between: str = "general",
        between_variance: float = 1.0,
        between_covariance: float = 0.3,
        within_variance: float = 0.5,
    ) -> "GCSKernel":
        """Kernel with default starting values for the given groups.

        ``groups`` is either a list of group sizes (contiguous levels) or a
        list of lists of 1-based levels.
        """
        relabel = _groups_to_relabeling(groups)
        part = relabel.partition
        G = part.n_groups
        schemes = (within,) * G if isinstance(within, str) else tuple(within)
        B = (between_variance - between_covariance) * np.eye(G) + between_covariance * np.ones((G, G))
        Ms = tuple(within_variance * np.eye(n - 1) for n in part.group_sizes)
        return cls(relabel, B, Ms, between, schemes)

    def param_specs(self):
        G = self.partition.n_groups
        specs: list[P.ParamSpec] = []
        if self.between_scheme == "general":
            specs += P.chol_specs("B*", G)
        elif G == 1:
            specs.append(P.log_variance("B*"))
        else:
            specs += [P.log_variance("B*.v_mu"), P.log_variance("B*.v_lambda")]
        for g, (n, s) in enumerate(zip(self.partition.group_sizes, self.within_schemes)):
            if n == 1:
                continue
            if s == "cs":
                specs.append(P.log_variance(f"M{g + 1}"))
            else:
                specs += P.chol_specs(f"M{g + 1}", n - 1)
        return specs

    def pack(self):
        from ..covariance import CSSpec

        G = self.partition.n_groups
        parts = []
        if self.between_scheme == "general":
            parts.append(P.chol_pack(self.between))
        elif G == 1:
            parts.append(np.log(self.between.ravel()))
        else:
            parts.append(np.log(hierarchical_from_cs(CSSpec(G, self.between[0, 0], self.between[0, 1]))))
        for n, s, M in zip(self.partition.group_sizes, self.within_schemes, self.within_reduced):
            if n == 1:
                continue
            parts.append(np.log([M[0, 0]]) if s == "cs" else P.chol_pack(M))
        return np.concatenate(parts) if parts else np.zeros(0)

    def unpack(self, vec):
        vec = P.check_finite(vec)
        part = self.partition
        G = part.n_groups
        pos = 0
        if self.between_scheme == "general":
            k = G * (G + 1) // 2
            B = P.chol_unpack(vec[:k], G)
            pos = k
        elif G == 1:
            B = np.exp(vec[:1]).reshape(1, 1)
            pos = 1
        else:
            spec = cs_from_hierarchical(G, float(np.exp(vec[0])), float(np.exp(vec[1])))
            B = cs_matrix(spec)
            pos = 2
        Ms = []
        for n, s in zip(part.group_sizes, self.within_schemes):
            if n == 1:
                Ms.append(np.zeros((0, 0)))
            elif s == "cs":
                Ms.append(np.exp(vec[pos]) * np.eye(n - 1))
                pos += 1
            else:
                k = n * (n - 1) // 2
                Ms.append(P.chol_unpack(vec[pos:pos + k], n - 1))
                pos += k
        if pos != vec.size:
            raise DomainError(f"expected {pos} parameters, got {vec.size}")
        return GCSKernel(self.relabel, B, tuple(Ms), self.between_scheme, self.within_schemes)

    def gcs_params(self):
        from ..covariance import GCSParams

        return GCSParams(self.partition, self.between, self.within_reduced)

    def block_average(self) -> np.ndarray:
        return self.between.copy()

    def to_dict(self):
        return {
            "type": self.kind,
            "groups": self.relabel.groups(),
            "between_scheme": self.between_scheme,
            "within_schemes": list(self.within_schemes),
            "between": self.between.tolist(),
            "within_reduced": [M.tolist() for M in self.within_reduced],
        }

    @classmethod
    def from_dict(cls, d):
        relabel = _groups_to_relabeling(d["groups"])
        if "within_reduced" not in d:
            return cls.create(d["groups"], d.get("within_schemes", d.get("within", "cs")), d.get("between_scheme", d.get("between", "general")))
        Ms = tuple(np.asarray(M, dtype=float).reshape(n - 1, n - 1) for M, n in zip(d["within_reduced"], relabel.partition.group_sizes))
        return cls(relabel, np.asarray(d["between"], dtype=float), Ms, d.get("between_scheme", "general"), tuple(d.get("within_schemes", ())))


# ------------------------------------------------- homoscedastic group matrix


@_register
@dataclass(frozen=True, eq=False)
class GroupCorrelationKernel(CategoricalKernel):
    """Constant-variance block matrix ``v * C`` with within/between group correlations.

    The parameterization does not guarantee positive semidefiniteness; it is
    checked through the block-average criterion (:meth:`is_valid`), which the
    likelihood uses to reject invalid points.
    """

    kind: ClassVar[str] = "group"
    relabel: Relabeling
    variance: float = 1.0
    within: tuple = ()
    between: np.ndarray = None
    between_scheme: str = "general"
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        part = self.partition
        G = part.n_groups
        within = tuple(float(x) for x in self.within) or (0.5,) * G
        if len(within) != G:
            raise DomainError(f"expected {G} within-group correlations")
        for n, r in zip(part.group_sizes, within):
            lo = -1.0 / (n - 1) if n > 1 else -np.inf
            if n > 1 and not lo <= r <= 1.0:
                raise DomainError(f"within correlation {r} outside [{lo:.3g}, 1] for a group of {n}")
        C = np.zeros((G, G)) if self.between is None else np.array(self.between, dtype=float).reshape(G, G)
        if self.between_scheme == "cs" and G > 1:
            off = C[~np.eye(G, dtype=bool)]
            if np.ptp(off) > 1e-12:
                raise DomainError("between scheme 'cs' requires one common between correlation")
        if not self.variance > 0:
            raise DomainError("variance must be positive")
        np.fill_diagonal(C, within)
        object.__setattr__(self, "within", within)
        object.__setattr__(self, "between", C)
        X = part.membership()
        T = self.variance * (X @ C @ X.T)
        np.fill_diagonal(T, self.variance)
        if not self.relabel.is_identity:
            T = self.relabel.matrix_to_original(T)
        object.__setattr__(self, "matrix", T)

    @property
    def partition(self) -> GroupPartition:
        return self.relabel.partition

    @classmethod
    def create(cls, groups, between="general", variance=1.0, within=0.5, between_corr=0.2):
        relabel = _groups_to_relabeling(groups)
        G = relabel.partition.n_groups
        C = np.full((G, G), between_corr)
        return cls(relabel, variance, (within,) * G, C, between)

    def block_average(self) -> np.ndarray:
        n = np.asarray(self.partition.group_sizes, dtype=float)
        Tt = self.variance * self.between.copy()
        Tt[np.diag_indices_from(Tt)] = self.variance * (1.0 + (n - 1.0) * np.asarray(self.within)) / n
        return Tt

    def is_valid(self) -> bool:
        # within correlations are kept in the GCS range, so PSD <=> block average PSD;
        # same threshold as gcs_validate (relative to the full matrix)
        return min_eigenvalue(self.block_average()) >= -psd_tolerance(self.matrix)

    def _within_bounds(self):
        return [(-1.0 / (n - 1), 1.0) for n in self.partition.group_sizes if n > 1]

    def param_specs(self):
        G = self.partition.n_groups
        specs = [P.log_variance("variance")]
        specs += [P.logit(f"within{g + 1}") for g, n in enumerate(self.partition.group_sizes) if n > 1]
        if G > 1:
            if self.between_scheme == "cs":
                specs.append(P.logit("between", -1.0, 1.0))
            else:
                specs += [P.logit(f"between[{g + 1},{h + 1}]", -1.0, 1.0) for g in range(G) for h in range(g + 1, G)]
        return specs

    def pack(self):
        G = self.partition.n_groups
        out = [math.log(self.variance)]
        idx = [g for g, n in enumerate(self.partition.group_sizes) if n > 1]
        for g, (lo, hi) in zip(idx, self._within_bounds()):
            out.append(float(P.logit_fn((self.within[g] - lo) / (hi - lo))))
        if G > 1:
            iu = np.triu_indices(G, 1)
            vals = self.between[iu][:1] if self.between_scheme == "cs" else self.between[iu]
            out.extend(np.arctanh(vals))
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise DomainError("correlations on the boundary have no unconstrained representation")
        return out

    def unpack(self, vec):
        vec = P.check_finite(vec)
        G = self.partition.n_groups
        within = list(self.within)
        pos = 1
        idx = [g for g, n in enumerate(self.partition.group_sizes) if n > 1]
        for g, (lo, hi) in zip(idx, self._within_bounds()):
            within[g] = lo + (hi - lo) * float(P.sigmoid(vec[pos]))
            pos += 1
        C = np.zeros((G, G))
        if G > 1:
            iu = np.triu_indices(G, 1)
            if self.between_scheme == "cs":
                C[iu] = np.tanh(vec[pos])
                pos += 1
            else:
                k = iu[0].size
                C[iu] = np.tanh(vec[pos:pos + k])
                pos += k
            C = C + C.T
        if pos != vec.size:
            raise DomainError(f"expected {pos} parameters, got {vec.size}")
        return GroupCorrelationKernel(self.relabel, float(np.exp(vec[0])), tuple(within), C, self.between_scheme)

    def to_dict(self):
        return {
            "type": self.kind,
            "groups": self.relabel.groups(),
            "variance": self.variance,
            "within": list(self.within),
            "between": self.between.tolist(),
            "between_scheme": self.between_scheme,
        }

    @classmethod
    def from_dict(cls, d):
        relabel = _groups_to_relabeling(d["groups"])
        if "within" not in d or not isinstance(d["within"], list):
            return cls.create(d["groups"], d.get("between_scheme", d.get("between", "general")))
        return cls(relabel, float(d["variance"]), tuple(d["within"]), np.asarray(d["between"]), d.get("between_scheme", "general"))


# --------------------------------------------------------------- spherical


@_register
@dataclass(frozen=True, eq=False)
class SphericalKernel(CategoricalKernel):
    """General covariance ``L L^T`` with spherical Cholesky factor.

    One variance (homoscedastic) or one per level, plus ``L(L-1)/2`` angles
    in ``(0, pi)``.
    """

    kind: ClassVar[str] = "spherical"
    levels: int
    variances: tuple = (1.0,)
    angles: tuple = ()
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L = self.levels
        angles = np.asarray(self.angles, dtype=float).ravel()
        if angles.size == 0:
            angles = np.full(L * (L - 1) // 2, math.pi / 2)
        variances = np.atleast_1d(np.asarray(self.variances, dtype=float)).ravel()
        if variances.size not in (1, L):
            raise DomainError(f"expected 1 or {L} variances")
        if not np.all((angles > 0) & (angles < math.pi)):
            raise DomainError("spherical angles must lie in (0, pi)")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "variances", variances)
        F = spherical_to_cholesky(variances, angles)
        object.__setattr__(self, "matrix", F @ F.T)

    @property
    def heteroscedastic(self) -> bool:
        return len(self.variances) > 1

    def param_specs(self):
        var = [P.log_variance(f"variance{i + 1}") for i in range(len(self.variances))]
        return var + [P.logit(f"angle{k + 1}", -1.5, 1.5) for k in range(len(self.angles))]

    def pack(self):
        return np.concatenate([np.log(self.variances), P.logit_fn(np.asarray(self.angles) / math.pi)])

    def unpack(self, vec):
        vec = P.check_finite(vec)
        nv = len(self.variances)
        if vec.size != nv + len(self.angles):
            raise DomainError(f"expected {nv + len(self.angles)} parameters, got {vec.size}")
        theta = math.pi * P.sigmoid(vec[nv:])
        # keep angles strictly inside (0, pi) under saturation
        theta = np.clip(theta, 1e-12, math.pi - 1e-12)
        return SphericalKernel(self.levels, np.exp(vec[:nv]), theta)

    def to_dict(self):
        return {"type": self.kind, "levels": self.levels, "variances": self.variances.tolist(), "angles": self.angles.tolist()}

    @classmethod
    def from_dict(cls, d):
        L = int(d["levels"])
        variances = d.get("variances")
        if variances is None:
            variances = (1.0,) * (L if d.get("heteroscedastic", False) else 1)
        return cls(L, tuple(variances), tuple(d.get("angles", ())))


# ---------------------------------------------------------------- ordinal


@_register
@dataclass(frozen=True, eq=False)
class OrdinalKernel(CategoricalKernel):
    """``T[l, l'] = variance * k(F(l), F(l'))`` for a warping ``F`` and 1-D kernel ``k``.

    With a cosine base the positions must stay within ``[0, alpha]``.
    """

    kind: ClassVar[str] = "ordinal"
    warping: Warping
    base: ContinuousKernel1D = ContinuousKernel1D("cosine")
    variance: float = 1.0
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError("ordinal kernel variance must be positive")
        F = warp_positions(self.warping)
        if self.base.family == "cosine" and F[-1] > self.base.alpha * (1 + 1e-12):
            raise DomainError(f"warped positions reach {F[-1]:.4g} > alpha={self.base.alpha:.4g}")
        object.__setattr__(self, "matrix", self.variance * self.base(F[:, None], F[None, :]))

    @property
    def positions(self) -> np.ndarray:
        return warp_positions(self.warping)

    @property
    def _cosine(self) -> bool:
        return self.base.family == "cosine"

    def param_specs(self):
        w = self.warping
        specs = [P.log_variance("variance")]
        if w.kind == "piecewise_linear":
            lo, hi = (-1.0, 1.0) if self._cosine else (math.log(0.05), math.log(1.0))
            specs += [P.ParamSpec(f"increment{k + 1}", "warp", lo, hi) for k in range(w.level_count - 1)]
        else:
            specs += [
                P.ParamSpec("location", "location", 1.0, float(w.level_count)),
                P.ParamSpec("log_scale", "warp", math.log(0.3), math.log(max(w.level_count, 2))),
            ]
            if not self._cosine:
                specs.append(P.ParamSpec("log_span", "warp", math.log(0.3), math.log(3.0)))
        return specs

    def pack(self):
        w = self.warping
        out = [math.log(self.variance)]
        if w.kind == "piecewise_linear":
            inc = np.asarray(w.increments)
            if self._cosine:
                slack = self.base.alpha - inc.sum()
                if slack <= 0 or np.any(inc <= 0):
                    raise DomainError("warping on the boundary has no unconstrained representation")
                out.extend(np.log(inc / slack))
            else:
                if np.any(inc <= 0):
                    raise DomainError("zero increments have no unconstrained representation")
                out.extend(np.log(inc))
        else:
            out += [w.location, math.log(w.scale)]
            if not self._cosine:
                out.append(math.log(w.span))
        return np.asarray(out, dtype=float)

    def unpack(self, vec):
        vec = P.check_finite(vec)
        w = self.warping
        if vec.size != self.n_params:
            raise DomainError(f"expected {self.n_params} parameters, got {vec.size}")
        v = float(np.exp(vec[0]))
        if w.kind == "piecewise_linear":
            z = vec[1:]
            if self._cosine:
                # softmax against a unit slack: increments sum to less than alpha
                m = max(0.0, float(z.max(initial=0.0)))
                e = np.exp(z - m)
                inc = self.base.alpha * e / (math.exp(-m) + e.sum())
            else:
                inc = np.exp(z)
            nw = Warping("piecewise_linear", w.level_count, tuple(inc))
        else:
            span = self.base.alpha if self._cosine else float(np.exp(vec[3]))
            nw = Warping("normal_cdf", w.level_count, (), float(vec[1]), float(np.exp(vec[2])), span)
        return OrdinalKernel(nw, self.base, v)

    def to_dict(self):
        return {"type": self.kind, "warping": self.warping.to_dict(), "base": self.base.to_dict(), "variance": self.variance}

    @classmethod
    def from_dict(cls, d):
        base = ContinuousKernel1D.from_dict(d.get("base", {"family": "cosine"}))
        if "warping" in d and isinstance(d["warping"], dict):
            w = Warping.from_dict(d["warping"])
        else:
            L = int(d["levels"])
            kind = d.get("warping", "piecewise_linear")
            w = default_warping(kind, L, base)
        return cls(w, base, float(d.get("variance", 1.0)))


def default_warping(kind: str, level_count: int, base: ContinuousKernel1D) -> Warping:
    if kind == "piecewise_linear":
        total = base.alpha * (level_count - 1) / level_count if base.family == "cosine" else 1.0
        return Warping.equally_spaced(level_count, total)
    span = base.alpha if base.family == "cosine" else 1.0
    return Warping("normal_cdf", level_count, (), (1 + level_count) / 2.0, level_count / 2.0, span)


def ordinal_kernel(warping: Warping, base: ContinuousKernel1D, variance: float = 1.0) -> OrdinalKernel:
    return OrdinalKernel(warping, base, variance)
