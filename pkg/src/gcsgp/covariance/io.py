"""JSON and CSV exchange formats for block covariance matrices."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from ..exceptions import DomainError
from .partition import GroupPartition


def matrix_to_json(T, partition: GroupPartition | None = None) -> dict:
    T = np.asarray(T, dtype=float)
    part = partition.group_sizes if partition is not None else [T.shape[0]]
    return {"size": int(T.shape[0]), "partition": list(part), "data": T.ravel().tolist()}


def matrix_from_json(doc: dict) -> tuple[np.ndarray, GroupPartition]:
    try:
        n = int(doc["size"])
        data = np.asarray(doc["data"], dtype=float)
        part = GroupPartition(doc.get("partition", [n]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed matrix document: {exc}") from exc
    if data.size != n * n:
        raise DomainError(f"'data' has {data.size} entries, expected {n * n}")
    if part.level_count != n:
        raise DomainError(f"partition covers {part.level_count} levels, matrix size is {n}")
    return data.reshape(n, n), part


def write_matrix_csv(path, T, labels: Sequence | None = None) -> None:
    T = np.asarray(T, dtype=float)
    labels = list(labels) if labels is not None else [str(i + 1) for i in range(T.shape[0])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(labels)
        for row in T:
            w.writerow([repr(float(x)) for x in row])


def read_matrix_csv(path) -> tuple[np.ndarray, list[str]]:
    """Read a square matrix whose first row holds level labels."""
    text = Path(path).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DomainError(f"{path}: empty matrix file")
    labels = [c.strip() for c in rows[0]]
    n = len(labels)
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != n:
            raise DomainError(f"{path}:{lineno}: expected {n} fields, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise DomainError(f"{path}:{lineno}: {exc}") from exc
    if len(data) != n:
        raise DomainError(f"{path}: expected {n} data rows, got {len(data)}")
    return np.asarray(data), labels


def load_matrix(path) -> tuple[np.ndarray, GroupPartition | None]:
    """Load from ``.json`` (with partition) or CSV (partition unknown)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
        return matrix_from_json(doc)
    T, _ = read_matrix_csv(path)
    return T, None
