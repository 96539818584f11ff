"""Repeated design -> fit -> Q² benchmark over a set of model variants.

Each (repetition, variant) cell is independent: the design depends only on
``(seed, repetition)`` and the fit seed on ``(seed, repetition, variant)``,
so reports are reproducible whatever the execution order or process count.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, build_kernel
from .data import Dataset, InputSchema
from .design import cross_levels, grid, slhd, stratified_regular
from .exceptions import DomainError, GCSError
from .gp import FitConfig, fit, q2
from .kernels import GCSKernel, GroupCorrelationKernel, OrdinalKernel, SphericalKernel, CSKernel
from .testfunctions import get_test_function

logger = logging.getLogger(__name__)

DESIGN_TYPES = ("slhd", "stratified")


@dataclass
class Variant:
    """A named categorical kernel block plus optional fit overrides."""

    name: str
    categorical: dict
    fit: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"name": self.name, "categorical": self.categorical}
        if self.fit:
            d["fit"] = self.fit
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Variant":
        try:
            return cls(str(d["name"]), dict(d["categorical"]), dict(d.get("fit", {})))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"benchmark.variants: malformed entry {d!r} ({exc})") from exc


@dataclass
class BenchmarkConfig:
    function: str
    variants: list[Variant]
    repetitions: int = 20
    design: dict = field(default_factory=lambda: {"type": "slhd", "points_per_level": 3})
    test_grid: int = 1000
    continuous: dict = field(default_factory=lambda: {"family": "matern52", "lengthscale": 0.2})
    fit: FitConfig = field(default_factory=FitConfig)
    seed: int = 0
    processes: int = 1

    def __post_init__(self):
        if int(self.repetitions) < 1:
            raise ConfigError("benchmark.repetitions must be >= 1")
        if not self.variants:
            raise ConfigError("benchmark.variants must not be empty")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ConfigError(f"benchmark.variants: duplicate names {names}")
        if self.design.get("type") not in DESIGN_TYPES:
            raise ConfigError(f"benchmark.design.type must be one of {DESIGN_TYPES}")
        if int(self.design.get("points_per_level", 0)) < 1:
            raise ConfigError("benchmark.design.points_per_level must be >= 1")
        if int(self.test_grid) < 2:
            raise ConfigError("benchmark.test_grid must be >= 2")
        get_test_function(self.function)

    @property
    def schema(self) -> InputSchema:
        return InputSchema(("x",), (("u", get_test_function(self.function).levels),))

    def kernel(self, variant: Variant):
        return build_kernel(self.schema, {"x": self.continuous, "u": variant.categorical}, "product")

    def fit_config(self, variant: Variant, rep: int, index: int) -> FitConfig:
        d = self.fit.to_dict()
        d.update(variant.fit)
        d["seed"] = _derive_seed(self.seed, rep, index + 1)
        return FitConfig.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "function": self.function,
            "variants": [v.to_dict() for v in self.variants],
            "repetitions": self.repetitions,
            "design": self.design,
            "test_grid": self.test_grid,
            "continuous": self.continuous,
            "fit": self.fit.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict, fit: FitConfig | None = None) -> "BenchmarkConfig":
        d = dict(d)
        preset = d.pop("preset", None)
        if preset is not None:
            base = builtin_config(preset).to_dict()
            base.update(d)
            d = base
        known = {"function", "variants", "repetitions", "design", "test_grid", "continuous", "fit", "seed", "processes"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"benchmark: unknown field(s) {sorted(unknown)}")
        if "function" not in d or "variants" not in d:
            raise ConfigError("benchmark: 'function' and 'variants' (or 'preset') are required")
        fit_cfg = FitConfig.from_dict(d["fit"]) if "fit" in d else (fit or FitConfig())
        return cls(
            function=d["function"],
            variants=[Variant.from_dict(v) for v in d["variants"]],
            repetitions=int(d.get("repetitions", 20)),
            design=dict(d.get("design", {"type": "slhd", "points_per_level": 3})),
            test_grid=int(d.get("test_grid", 1000)),
            continuous=dict(d.get("continuous", {"family": "matern52", "lengthscale": 0.2})),
            fit=fit_cfg,
            seed=int(d.get("seed", 0)),
            processes=int(d.get("processes", 1)),
        )


def _derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint32)[0])


def make_design(config: BenchmarkConfig, rep: int):
    spec = config.design
    m = int(spec["points_per_level"])
    L = get_test_function(config.function).levels
    if spec["type"] == "stratified":
        return stratified_regular(m, L, 1)
    return slhd(m, L, 1, seed=_derive_seed(config.seed, rep, 0), jitter=bool(spec.get("jitter", False)))


def make_test_set(config: BenchmarkConfig):
    L = get_test_function(config.function).levels
    return cross_levels(grid(config.test_grid, 1), (L,))


# --------------------------------------------------------------- counting


def reference_count(leaf_kernel) -> int | None:
    """Parameter count under the homoscedastic counting convention.

    One variance, one within-group correlation per group (singletons
    included), one or ``G(G-1)/2`` between-group correlations, or the
    angles / warping increments for the spherical and ordinal kernels; plus
    three for the continuous lengthscale, the trend and the noise.
    """
    k = leaf_kernel
    if isinstance(k, CSKernel):
        cat = 2
    elif isinstance(k, (GroupCorrelationKernel, GCSKernel)):
        G = k.partition.n_groups
        scheme = k.between_scheme
        between = 0 if G == 1 else (1 if scheme == "cs" else G * (G - 1) // 2)
        cat = 1 + G + between
    elif isinstance(k, SphericalKernel):
        L = k.levels
        cat = len(k.variances) + L * (L - 1) // 2
    elif isinstance(k, OrdinalKernel):
        cat = k.n_params
    else:
        return None
    return cat + 3


# ------------------------------------------------------------------ cells


def run_cell(config: BenchmarkConfig, rep: int, index: int) -> dict:
    variant = config.variants[index]
    f = get_test_function(config.function)
    design = make_design(config, rep)
    test = make_test_set(config)
    ds = Dataset(config.schema, design.X, design.U, f(design.X[:, 0], design.U[:, 0]))
    y_test = f(test.X[:, 0], test.U[:, 0])
    template = config.kernel(variant)
    fit_cfg = config.fit_config(variant, rep, index)
    out = {"repetition": rep, "variant": variant.name}
    try:
        model = fit(ds, template, fit_cfg)
        mean, _ = model.predict(test.X, test.U)
        out.update(
            q2=q2(y_test, mean),
            nll=model.nll,
            noise_variance=model.noise_variance,
            correlation=model.categorical_correlations()["u"].tolist(),
        )
    except GCSError as exc:
        logger.warning("rep %d, variant %s failed: %s", rep, variant.name, exc)
        out.update(q2=None, error=f"{type(exc).__name__}: {exc}")
    return out


def _cell_star(args):
    return run_cell(*args)


# ----------------------------------------------------------------- report


@dataclass
class BenchmarkReport:
    config: BenchmarkConfig
    cells: list[dict]

    def q2_samples(self, name: str) -> np.ndarray:
        vals = [c["q2"] for c in self.cells if c["variant"] == name and c["q2"] is not None]
        return np.asarray(vals, dtype=float)

    def median(self, name: str) -> float:
        s = self.q2_samples(name)
        return float(np.median(s)) if s.size else math.nan

    def iqr(self, name: str) -> float:
        s = self.q2_samples(name)
        if not s.size:
            return math.nan
        q75, q25 = np.percentile(s, [75, 25])
        return float(q75 - q25)

    def median_cell(self, name: str) -> dict | None:
        """The run whose Q² is the (lower) median of the variant's successful runs."""
        runs = sorted((c for c in self.cells if c["variant"] == name and c["q2"] is not None),
                      key=lambda c: (c["q2"], c["repetition"]))
        return runs[(len(runs) - 1) // 2] if runs else None

    def parameter_counts(self, variant: Variant) -> dict:
        kernel = self.config.kernel(variant)
        leaf = kernel.categorical_leaves()[0]
        fit_noise = self.config.fit_config(variant, 0, 0).fit_noise
        return {
            "categorical": leaf.kernel.n_params,
            "total": kernel.n_params + int(fit_noise) + 1,
            "reference": reference_count(leaf.kernel),
        }

    def summary(self) -> dict:
        variants = {}
        for v in self.config.variants:
            med = self.median_cell(v.name)
            variants[v.name] = {
                "q2": [c["q2"] for c in self.cells if c["variant"] == v.name],
                "median_q2": self.median(v.name),
                "iqr_q2": self.iqr(v.name),
                "failures": [c for c in self.cells if c["variant"] == v.name and c["q2"] is None],
                "parameter_counts": self.parameter_counts(v),
                "median_run": None if med is None else med["repetition"],
                "median_run_correlation": None if med is None else med["correlation"],
            }
        return {"config": self.config.to_dict(), "variants": variants}

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        summary = self.summary()
        p = out / "summary.json"
        p.write_text(json.dumps(summary, indent=1, allow_nan=True))
        written.append(p)
        p = out / "q2.csv"
        names = [v.name for v in self.config.variants]
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["repetition"] + names)
            for r in range(self.config.repetitions):
                row = [r]
                for n in names:
                    c = next(c for c in self.cells if c["repetition"] == r and c["variant"] == n)
                    row.append("" if c["q2"] is None else repr(c["q2"]))
                w.writerow(row)
        written.append(p)
        for n in names:
            corr = summary["variants"][n]["median_run_correlation"]
            if corr is None:
                continue
            p = out / f"correlation_{_slug(n)}.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                L = len(corr)
                w.writerow([""] + [f"u{l}" for l in range(1, L + 1)])
                for l, row in enumerate(corr, start=1):
                    w.writerow([f"u{l}"] + [repr(float(v)) for v in row])
            written.append(p)
        return written


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower()


def run_benchmark(config: BenchmarkConfig, out_dir=None, variants: list[str] | None = None) -> BenchmarkReport:
    """Run every (repetition, variant) cell; failed fits are recorded, not raised."""
    if variants is not None:
        missing = set(variants) - {v.name for v in config.variants}
        if missing:
            raise DomainError(f"unknown variant(s) {sorted(missing)}")
        config = BenchmarkConfig(**{**config.__dict__, "variants": [v for v in config.variants if v.name in variants]})
    jobs = [(config, r, i) for r in range(config.repetitions) for i in range(len(config.variants))]
    if config.processes > 1:
        with ProcessPoolExecutor(max_workers=config.processes) as pool:
            cells = list(pool.map(_cell_star, jobs))
    else:
        cells = [_cell_star(j) for j in jobs]
    report = BenchmarkReport(config, cells)
    if out_dir is not None:
        report.write(out_dir)
    return report


# ---------------------------------------------------------------- presets


def _range(a, b):
    return list(range(a, b + 1))


def example1_variants() -> list[Variant]:
    two = [_range(1, 9), _range(10, 13)]
    five = [_range(1, 9), [10], [11], [12], [13]]
    return [
        Variant("1 group", {"type": "group", "groups": [_range(1, 13)]}),
        Variant("2 groups", {"type": "group", "groups": two, "between": "general"}),
        Variant("5 groups (a)", {"type": "group", "groups": five, "between": "cs"}),
        Variant("5 groups (b)", {"type": "group", "groups": five, "between": "general"}),
        Variant("13 groups", {"type": "spherical"}),
        Variant("ordinal", {"type": "ordinal", "warping": "piecewise_linear", "base": {"family": "cosine"}}),
    ]


def example2_variants() -> list[Variant]:
    return [
        Variant("2 groups", {"type": "gcs", "groups": [_range(1, 4), _range(5, 10)],
                             "within": ["cs", "general"], "between": "general"}),
        Variant("3 groups", {"type": "gcs", "groups": [_range(1, 4), _range(5, 7), _range(8, 10)],
                             "within": "cs", "between": "general"}),
    ]


def builtin_config(name: str, repetitions: int | None = None, seed: int = 0) -> BenchmarkConfig:
    if name == "example1":
        return BenchmarkConfig("example1", example1_variants(), repetitions or 20,
                               {"type": "slhd", "points_per_level": 3}, seed=seed)
    if name == "example2":
        return BenchmarkConfig("example2", example2_variants(), repetitions or 1,
                               {"type": "stratified", "points_per_level": 3}, seed=seed)
    raise DomainError(f"unknown preset {name!r}; choose example1 or example2")
