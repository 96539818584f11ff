"""JSON configuration: schema, per-input kernels, their combination, fitting and benchmark settings.

A minimal document::

    {
      "schema": {"continuous": ["x"], "categorical": [{"name": "u", "levels": 4}]},
      "kernel": {
        "x": {"family": "matern52", "lengthscale": 0.2},
        "u": {"type": "gcs", "groups": [[1, 2], [3, 4]], "within": "cs", "between": "general"}
      },
      "combination": "product",
      "fit": {"n_starts": 5, "seed": 0}
    }

Continuous blocks take ``family`` (``matern52``, ``squared_exponential``,
``cosine``), ``lengthscale`` and optionally ``variance`` and
``fixed_lengthscale``. Categorical blocks are the serialized form of a
categorical kernel (``type`` one of ``cs``, ``gcs``, ``group``, ``spherical``,
``ordinal``); shorthand entries such as ``{"type": "spherical"}`` are
completed from the schema. ``"correlation": true`` turns a categorical leaf
into a correlation-only factor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import InputSchema
from .exceptions import CompositionError, DomainError
from .gp import FitConfig
from .kernels import (
    CategoricalLeaf,
    Combine,
    ContinuousKernel1D,
    ContinuousLeaf,
    Kernel,
    categorical_from_dict,
)

SECTIONS = ("schema", "kernel", "combination", "fit", "benchmark")


class ConfigError(DomainError):
    """Malformed configuration; the message names the offending field."""


@dataclass
class Config:
    schema: InputSchema
    kernel_spec: dict
    combination: str = "product"
    fit: FitConfig = field(default_factory=FitConfig)
    benchmark: dict | None = None
    source: str = "<config>"

    def build_kernel(self, kernel_spec: dict | None = None) -> Kernel:
        return build_kernel(self.schema, kernel_spec or self.kernel_spec, self.combination)


def _categorical_block(spec: dict, name: str, levels: int):
    d = dict(spec)
    corr = bool(d.pop("correlation", False))
    d.setdefault("levels", levels)
    kind = d.get("type")
    if kind in ("gcs", "group") and "groups" not in d:
        raise ConfigError(f"kernel.{name}: 'groups' is required for type {kind!r}")
    if "groups" in d:
        covered = sorted(l for g in d["groups"] for l in (g if isinstance(g, list) else [g]))
        if all(isinstance(g, list) for g in d["groups"]) and covered != list(range(1, levels + 1)):
            raise ConfigError(f"kernel.{name}.groups must cover levels 1..{levels} exactly once")
    try:
        kernel = categorical_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"kernel.{name}: {exc}") from exc
    if kernel.level_count != levels:
        raise ConfigError(f"kernel.{name}: kernel has {kernel.level_count} levels, schema declares {levels}")
    return kernel, corr


def build_kernel(schema: InputSchema, spec: dict, combination: str = "product") -> Kernel:
    """Assemble the kernel expression for every schema input.

    Under ``product`` and ``anova`` only the first variance-carrying
    categorical leaf keeps its scale; further categorical leaves become
    correlation-only so the expression stays identifiable.
    """
    if combination not in ("sum", "product", "anova"):
        raise ConfigError(f"combination: expected sum|product|anova, got {combination!r}")
    missing = [n for n in list(schema.continuous) + [n for n, _ in schema.categorical] if n not in spec]
    if missing:
        raise ConfigError(f"kernel: no block for input(s) {missing}")
    unknown = set(spec) - set(schema.continuous) - {n for n, _ in schema.categorical}
    if unknown:
        raise ConfigError(f"kernel: block(s) for unknown input(s) {sorted(unknown)}")
    leaves = []
    for i, name in enumerate(schema.continuous):
        block = dict(spec[name])
        try:
            kern = ContinuousKernel1D.from_dict(block)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"kernel.{name}: {exc}") from exc
        variance = block.get("variance")
        if variance is None and combination == "sum":
            variance = 1.0
        leaves.append(ContinuousLeaf(i, kern, None if variance is None else float(variance),
                                     bool(block.get("fixed_lengthscale", False))))
    carried = False
    for j, (name, L) in enumerate(schema.categorical):
        kernel, corr = _categorical_block(spec[name], name, L)
        if combination != "sum" and not corr:
            corr, carried = carried, True
        leaves.append(CategoricalLeaf(j, kernel, corr))
    if not leaves:
        raise ConfigError("schema declares no inputs")
    try:
        expr = leaves[0] if len(leaves) == 1 else Combine(combination, tuple(leaves))
        return Kernel(expr)
    except CompositionError as exc:
        raise ConfigError(f"kernel: {exc}") from exc


def parse_config(doc: dict, source: str = "<config>") -> Config:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")
    if "schema" not in doc:
        raise ConfigError(f"{source}: missing section 'schema'")
    try:
        schema = InputSchema.from_dict(doc["schema"])
        fit = FitConfig.from_dict(doc.get("fit", {}))
    except DomainError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    cfg = Config(schema, doc.get("kernel", {}), doc.get("combination", "product"), fit, doc.get("benchmark"), source)
    if cfg.kernel_spec:
        try:
            cfg.build_kernel()
        except DomainError as exc:
            raise ConfigError(f"{source}: {exc}") from exc
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(doc, str(path))
