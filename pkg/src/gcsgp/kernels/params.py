"""Descriptors for unconstrained hyperparameters and their transforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DomainError

# Kinds whose starting range is shifted by the response scale:
#   log_variance -> + log(var y), log_sd -> + 0.5 log(var y), offdiag -> * sd(y)
SCALED_KINDS = ("log_variance", "log_sd", "offdiag")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    low: float
    high: float


def log_variance(name):
    return ParamSpec(name, "log_variance", -2.5, 1.0)


def log_sd(name):
    return ParamSpec(name, "log_sd", -1.25, 0.5)


def offdiag(name):
    return ParamSpec(name, "offdiag", -1.0, 1.0)


def logit(name, low=-2.0, high=2.0):
    return ParamSpec(name, "logit", low, high)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def logit_fn(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def check_finite(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=float).ravel()
    if not np.all(np.isfinite(vec)):
        raise DomainError("parameter vector contains non-finite values")
    return vec


def chol_pack(A: np.ndarray) -> np.ndarray:
    """Row-major lower Cholesky entries with log-diagonal."""
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    C = np.linalg.cholesky(A)
    out = []
    for i in range(n):
        out.extend(C[i, :i])
        out.append(np.log(C[i, i]))
    return np.asarray(out)


def chol_unpack(vec: np.ndarray, n: int) -> np.ndarray:
    C = np.zeros((n, n))
    pos = 0
    for i in range(n):
        C[i, :i] = vec[pos:pos + i]
        C[i, i] = np.exp(vec[pos + i])
        pos += i + 1
    return C @ C.T


def chol_specs(prefix: str, n: int) -> list[ParamSpec]:
    out = []
    for i in range(n):
        out.extend(offdiag(f"{prefix}[{i},{j}]") for j in range(i))
        out.append(log_sd(f"{prefix}[{i},{i}]"))
    return out
