"""Kernel expressions on the mixed space ``[0,1]^I x prod_j {1..L_j}``.

An expression is a tree whose leaves are 1-D continuous kernels or
categorical matrices, each bound to one input column, and whose inner nodes
are ``sum``, ``product`` or ``anova`` combinators. ``anova`` of children
``k_1..k_m`` evaluates ``prod_i (1 + k_i)``.

Identifiability: continuous leaves are correlations unless they carry their
own variance (allowed only outside products/ANOVA), and at most one leaf
per product chain carries a variance. The root variance ``sigma^2`` is a
free parameter only when no leaf carries a variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from ..exceptions import CompositionError, DomainError
from . import params as P
from .categorical import CategoricalKernel, categorical_from_dict
from .continuous import ContinuousKernel1D

OPS = ("sum", "product", "anova")


class Node:
    def inputs(self) -> set:
        raise NotImplementedError

    def carriers(self) -> int:
        """Number of independent variance scales under this node."""
        raise NotImplementedError

    def evaluate(self, Xa, Ua, Xb, Ub) -> np.ndarray:
        raise NotImplementedError

    def diag(self, X, U) -> np.ndarray:
        raise NotImplementedError

    def param_specs(self) -> list[P.ParamSpec]:
        raise NotImplementedError

    def pack(self) -> np.ndarray:
        raise NotImplementedError

    def unpack(self, vec: np.ndarray) -> "Node":
        raise NotImplementedError

    def is_valid(self) -> bool:
        return True

    def categorical_leaves(self) -> list["CategoricalLeaf"]:
        return []

    @cached_property
    def n_params(self) -> int:
        return len(self.param_specs())


@dataclass(frozen=True, eq=False)
class ContinuousLeaf(Node):
    input: int
    kernel: ContinuousKernel1D
    variance: float | None = None
    fixed_lengthscale: bool = False

    def inputs(self):
        return {("x", self.input)}

    def carriers(self):
        return int(self.variance is not None)

    def _scale(self):
        return 1.0 if self.variance is None else self.variance

    def evaluate(self, Xa, Ua, Xb, Ub):
        return self._scale() * self.kernel(Xa[:, self.input][:, None], Xb[:, self.input][None, :])

    def diag(self, X, U):
        return np.full(X.shape[0], self._scale())

    def _free_lengthscale(self):
        return self.kernel.has_lengthscale and not self.fixed_lengthscale

    def param_specs(self):
        specs = []
        if self._free_lengthscale():
            specs.append(P.ParamSpec(f"x{self.input}.lengthscale", "log_lengthscale", math.log(0.05), math.log(1.0)))
        if self.variance is not None:
            specs.append(P.log_variance(f"x{self.input}.variance"))
        return specs

    def pack(self):
        out = []
        if self._free_lengthscale():
            out.append(math.log(self.kernel.lengthscale))
        if self.variance is not None:
            out.append(math.log(self.variance))
        return np.asarray(out, dtype=float)

    def unpack(self, vec):
        vec = np.asarray(vec, dtype=float)
        pos = 0
        kernel, variance = self.kernel, self.variance
        if self._free_lengthscale():
            kernel = kernel.with_lengthscale(float(np.exp(vec[0])))
            pos += 1
        if variance is not None:
            variance = float(np.exp(vec[pos]))
        return replace(self, kernel=kernel, variance=variance)

    def to_dict(self):
        d = {"node": "continuous", "input": self.input, "kernel": self.kernel.to_dict()}
        if self.variance is not None:
            d["variance"] = self.variance
        if self.fixed_lengthscale:
            d["fixed_lengthscale"] = True
        return d


@dataclass(frozen=True, eq=False)
class CategoricalLeaf(Node):
    input: int
    kernel: CategoricalKernel
    correlation: bool = False
    _matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        M = self.kernel.correlation() if self.correlation else self.kernel.matrix
        object.__setattr__(self, "_matrix", M)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def inputs(self):
        return {("u", self.input)}

    def carriers(self):
        return int(not self.correlation)

    def _check_levels(self, U):
        u = U[:, self.input]
        if u.size and (u.min() < 1 or u.max() > self.kernel.level_count):
            raise DomainError(
                f"categorical input {self.input}: levels must be in 1..{self.kernel.level_count}, "
                f"got range {u.min()}..{u.max()}"
            )
        return u - 1

    def evaluate(self, Xa, Ua, Xb, Ub):
        ia = self._check_levels(Ua)
        ib = self._check_levels(Ub)
        return self._matrix[np.ix_(ia, ib)]

    def diag(self, X, U):
        return np.diag(self._matrix)[self._check_levels(U)]

    def param_specs(self):
        return [replace(s, name=f"u{self.input}.{s.name}") for s in self.kernel.param_specs()]

    def pack(self):
        return self.kernel.pack()

    def unpack(self, vec):
        return CategoricalLeaf(self.input, self.kernel.unpack(vec), self.correlation)

    def is_valid(self):
        return self.kernel.is_valid()

    def categorical_leaves(self):
        return [self]

    def to_dict(self):
        d = {"node": "categorical", "input": self.input, "kernel": self.kernel.to_dict()}
        if self.correlation:
            d["correlation"] = True
        return d


@dataclass(frozen=True, eq=False)
class Combine(Node):
    op: str
    children: tuple

    def __post_init__(self):
        if self.op not in OPS:
            raise CompositionError(f"unknown combination {self.op!r}; expected one of {OPS}")
        if len(self.children) < 1:
            raise CompositionError("a combination needs at least one child")
        seen: set = set()
        for child in self.children:
            shared = seen & child.inputs()
            if shared:
                raise CompositionError(f"inputs {sorted(shared)} appear in more than one operand")
            seen |= child.inputs()
        self.carriers()

    def inputs(self):
        return set().union(*(c.inputs() for c in self.children))

    def carriers(self):
        counts = [c.carriers() for c in self.children]
        if self.op == "product":
            if sum(counts) > 1:
                raise CompositionError(
                    "a product carries more than one variance; mark all but one categorical "
                    "leaf as correlation-only"
                )
            return sum(counts)
        if self.op == "anova":
            if any(isinstance(c, ContinuousLeaf) and c.variance is not None for c in self.children):
                raise CompositionError("continuous leaves inside ANOVA must be correlation-only")
        return max(counts)

    def evaluate(self, Xa, Ua, Xb, Ub):
        vals = [c.evaluate(Xa, Ua, Xb, Ub) for c in self.children]
        return self._reduce(vals)

    def diag(self, X, U):
        return self._reduce([c.diag(X, U) for c in self.children])

    def _reduce(self, vals):
        out = vals[0].copy() if self.op != "anova" else 1.0 + vals[0]
        for v in vals[1:]:
            if self.op == "sum":
                out += v
            elif self.op == "product":
                out *= v
            else:
                out *= 1.0 + v
        return out

    def param_specs(self):
        return [s for c in self.children for s in c.param_specs()]

    def pack(self):
        parts = [c.pack() for c in self.children]
        return np.concatenate(parts) if parts else np.zeros(0)

    def unpack(self, vec):
        vec = np.asarray(vec, dtype=float)
        out, pos = [], 0
        for c in self.children:
            k = c.n_params
            out.append(c.unpack(vec[pos:pos + k]))
            pos += k
        return Combine(self.op, tuple(out))

    def is_valid(self):
        return all(c.is_valid() for c in self.children)

    def categorical_leaves(self):
        return [leaf for c in self.children for leaf in c.categorical_leaves()]

    def to_dict(self):
        return {"node": "combine", "op": self.op, "children": [c.to_dict() for c in self.children]}


def combine(op: str, a: Node, b: Node) -> Combine:
    """Binary combination; operands must act on disjoint inputs."""
    return Combine(op, (a, b))


def node_from_dict(d: dict) -> Node:
    kind = d.get("node")
    if kind == "continuous":
        var = d.get("variance")
        return ContinuousLeaf(int(d["input"]), ContinuousKernel1D.from_dict(d["kernel"]),
                              None if var is None else float(var), bool(d.get("fixed_lengthscale", False)))
    if kind == "categorical":
        return CategoricalLeaf(int(d["input"]), categorical_from_dict(d["kernel"]), bool(d.get("correlation", False)))
    if kind == "combine":
        return Combine(d["op"], tuple(node_from_dict(c) for c in d["children"]))
    raise DomainError(f"unknown kernel node {kind!r}")


@dataclass(frozen=True, eq=False)
class Kernel:
    """Root of a kernel expression with the global variance ``sigma^2``."""

    expr: Node
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError("kernel variance must be positive")

    @property
    def variance_free(self) -> bool:
        return self.expr.carriers() == 0

    def param_specs(self) -> list[P.ParamSpec]:
        head = [P.log_variance("sigma2")] if self.variance_free else []
        return head + self.expr.param_specs()

    @cached_property
    def n_params(self) -> int:
        return len(self.param_specs())

    def pack(self) -> np.ndarray:
        head = [math.log(self.variance)] if self.variance_free else []
        return np.concatenate([head, self.expr.pack()])

    def unpack(self, vec) -> "Kernel":
        vec = P.check_finite(vec)
        if vec.size != self.n_params:
            raise DomainError(f"expected {self.n_params} parameters, got {vec.size}")
        if self.variance_free:
            return Kernel(self.expr.unpack(vec[1:]), float(np.exp(vec[0])))
        return Kernel(self.expr.unpack(vec), self.variance)

    def is_valid(self) -> bool:
        return self.expr.is_valid()

    def __call__(self, Xa, Ua, Xb=None, Ub=None) -> np.ndarray:
        Xa, Ua = _as_inputs(Xa, Ua)
        if Xb is None and Ub is None:
            Xb, Ub = Xa, Ua
        else:
            Xb, Ub = _as_inputs(Xb, Ub)
        return self.variance * self.expr.evaluate(Xa, Ua, Xb, Ub)

    def diag(self, X, U) -> np.ndarray:
        X, U = _as_inputs(X, U)
        return self.variance * self.expr.diag(X, U)

    def categorical_leaves(self):
        return self.expr.categorical_leaves()

    def to_dict(self) -> dict:
        return {"variance": self.variance, "expr": self.expr.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        return cls(node_from_dict(d["expr"]), float(d.get("variance", 1.0)))


def _as_inputs(X, U):
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=int)
    if X.ndim == 1:
        X = X[:, None]
    if U.ndim == 1:
        U = U[:, None]
    if X.shape[0] != U.shape[0]:
        if X.size == 0:
            X = np.zeros((U.shape[0], 0))
        elif U.size == 0:
            U = np.zeros((X.shape[0], 0), dtype=int)
        else:
            raise DomainError(f"continuous and categorical inputs disagree on N ({X.shape[0]} vs {U.shape[0]})")
    return X, U


def gram(kernel: Kernel, X, U, nugget: float = 0.0) -> np.ndarray:
    """``K_ab = sigma^2 * expr(w_a, w_b)`` plus ``nugget * sigma^2`` on the diagonal."""
    K = kernel(X, U)
    K = 0.5 * (K + K.T)
    if nugget:
        K[np.diag_indices_from(K)] += nugget * kernel.variance
    return K


def pack_params(kernel: Kernel) -> np.ndarray:
    return kernel.pack()


def unpack_params(vec, template: Kernel) -> Kernel:
    return template.unpack(vec)


def product_kernel(leaves: Sequence[Node]) -> Kernel:
    return Kernel(Combine("product", tuple(leaves)) if len(leaves) > 1 else leaves[0])
