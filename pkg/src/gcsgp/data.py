"""Input schemas, datasets and their CSV representation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DomainError


@dataclass(frozen=True)
class InputSchema:
    """Column roles: continuous inputs in [0, 1], categorical inputs with levels ``1..L_j``."""

    continuous: tuple[str, ...] = ()
    categorical: tuple[tuple[str, int], ...] = ()
    response: str = "y"

    def __post_init__(self):
        object.__setattr__(self, "continuous", tuple(self.continuous))
        object.__setattr__(self, "categorical", tuple((str(n), int(L)) for n, L in self.categorical))
        names = list(self.continuous) + [n for n, _ in self.categorical] + [self.response]
        if len(set(names)) != len(names):
            raise DomainError(f"duplicate column names in schema: {names}")
        if any(L < 1 for _, L in self.categorical):
            raise DomainError("categorical inputs need at least one level")

    @property
    def n_continuous(self) -> int:
        return len(self.continuous)

    @property
    def n_categorical(self) -> int:
        return len(self.categorical)

    @property
    def level_counts(self) -> tuple[int, ...]:
        return tuple(L for _, L in self.categorical)

    def categorical_index(self, name: str) -> int:
        for j, (n, _) in enumerate(self.categorical):
            if n == name:
                return j
        raise DomainError(f"no categorical input named {name!r}")

    def continuous_index(self, name: str) -> int:
        try:
            return self.continuous.index(name)
        except ValueError:
            raise DomainError(f"no continuous input named {name!r}") from None

    def check_points(self, X, U) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X if X is not None else [], dtype=float)
        U = np.asarray(U if U is not None else [], dtype=int)
        if self.n_continuous:
            X = X.reshape(-1, self.n_continuous)
        if self.n_categorical:
            U = U.reshape(-1, self.n_categorical)
        n = X.shape[0] if self.n_continuous else (U.shape[0] if self.n_categorical else 0)
        if not self.n_continuous:
            X = np.zeros((n, 0))
        if not self.n_categorical:
            U = np.zeros((n, 0), dtype=int)
        if X.shape[0] != U.shape[0]:
            raise DomainError(f"{X.shape[0]} continuous rows vs {U.shape[0]} categorical rows")
        if X.size and (X.min() < 0.0 or X.max() > 1.0):
            raise DomainError("continuous inputs must lie in [0, 1]")
        for j, (name, L) in enumerate(self.categorical):
            u = U[:, j]
            if u.size and (u.min() < 1 or u.max() > L):
                raise DomainError(f"input {name!r}: levels must be in 1..{L}, got {u.min()}..{u.max()}")
        return X, U

    def to_dict(self) -> dict:
        return {
            "continuous": list(self.continuous),
            "categorical": [{"name": n, "levels": L} for n, L in self.categorical],
            "response": self.response,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InputSchema":
        try:
            cats = []
            for c in d.get("categorical", []):
                if isinstance(c, dict):
                    cats.append((c["name"], int(c["levels"])))
                else:
                    cats.append((c[0], int(c[1])))
            return cls(tuple(d.get("continuous", [])), tuple(cats), d.get("response", "y"))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"schema: malformed entry ({exc})") from exc


@dataclass(frozen=True, eq=False)
class Dataset:
    schema: InputSchema
    X: np.ndarray
    U: np.ndarray
    y: np.ndarray = field(default=None)

    def __post_init__(self):
        X, U = self.schema.check_points(self.X, self.U)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)
        if self.y is not None:
            y = np.asarray(self.y, dtype=float).ravel()
            if y.size != X.shape[0]:
                raise DomainError(f"{y.size} responses for {X.shape[0]} points")
            if not np.all(np.isfinite(y)):
                raise DomainError("responses must be finite")
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def with_response(self, y) -> "Dataset":
        return Dataset(self.schema, self.X, self.U, y)


def read_csv(path, schema: InputSchema, require_response: bool = True) -> Dataset:
    """Read a dataset CSV whose header names the schema columns (extra columns are ignored)."""
    text = Path(path).read_text()
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    needed = list(schema.continuous) + [n for n, _ in schema.categorical]
    if require_response:
        needed.append(schema.response)
    missing = [c for c in needed if c not in header]
    if missing:
        raise DomainError(f"{path}:1: missing column(s) {missing}")
    has_y = schema.response in header
    X, U, y = [], [], []
    for lineno, row in enumerate(reader, start=2):
        try:
            X.append([float(row[c]) for c in schema.continuous])
            U.append([int(row[n]) for n, _ in schema.categorical])
            if has_y:
                y.append(float(row[schema.response]))
        except (TypeError, ValueError) as exc:
            raise DomainError(f"{path}:{lineno}: {exc}") from exc
    n = len(X)
    X = np.asarray(X, dtype=float).reshape(n, schema.n_continuous)
    U = np.asarray(U, dtype=int).reshape(n, schema.n_categorical)
    try:
        return Dataset(schema, X, U, np.asarray(y) if has_y else None)
    except DomainError as exc:
        raise DomainError(f"{path}: {exc}") from exc


def write_csv(path, schema: InputSchema, X, U, y=None, extra: dict | None = None) -> None:
    X = np.asarray(X, dtype=float).reshape(-1, schema.n_continuous)
    U = np.asarray(U, dtype=int).reshape(-1, schema.n_categorical)
    cols = list(schema.continuous) + [n for n, _ in schema.categorical]
    extra = dict(extra or {})
    if y is not None:
        cols.append(schema.response)
    cols += list(extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(X.shape[0]):
            row = [repr(float(v)) for v in X[i]] + [int(v) for v in U[i]]
            if y is not None:
                row.append(repr(float(y[i])))
            row += [repr(float(extra[k][i])) for k in extra]
            w.writerow(row)
