"""Command-line interface.

Exit codes: 0 success, 1 validation or fitting failure, 2 usage error or
malformed input (config, CSV, model file).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .benchmark import BenchmarkConfig, builtin_config, run_benchmark
from .config import ConfigError, load_config
from .covariance import GroupPartition, gcs_validate
from .covariance.io import load_matrix, write_matrix_csv
from .data import InputSchema, read_csv, write_csv
from .design import grid, lhs, slhd, stratified_regular
from .exceptions import DomainError, FitError, NumericalError
from .gp import GPModel, fit


EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

logger = logging.getLogger("gcsgp")


class UsageError(Exception):
    pass


def _parse_groups(text: str) -> GroupPartition:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
        return GroupPartition(sizes)
    except ValueError as exc:
        raise UsageError(f"--groups: expected comma-separated group sizes, got {text!r}") from exc


def _write_json(doc, out):
    text = json.dumps(doc, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required for '{args.command}'")


# ------------------------------------------------------------- subcommands


def cmd_validate(args) -> int:
    _need(args, "data")
    T, partition = load_matrix(args.data)
    if args.groups:
        partition = _parse_groups(args.groups)
    if partition is None:
        raise UsageError("the block partition is unknown: pass --groups or use a JSON matrix file")
    report = gcs_validate(T, partition)
    doc = {"file": str(args.data), "partition": list(partition.group_sizes), **report.to_dict()}
    _write_json(doc, args.out)
    for msg in report.failing_checks:
        print(f"{args.data}: {msg}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_fit(args) -> int:
    _need(args, "config", "data", "out")
    cfg = load_config(args.config)
    if not cfg.kernel_spec:
        raise ConfigError(f"{args.config}: section 'kernel' is required for fitting")
    fit_cfg = cfg.fit
    if args.seed is not None:
        fit_cfg = type(fit_cfg).from_dict({**fit_cfg.to_dict(), "seed": args.seed})
    ds = read_csv(args.data, cfg.schema)
    model = fit(ds, cfg.build_kernel(), fit_cfg)
    model.save(args.out)
    print(f"fitted {Path(args.data).name}: NLL {model.nll:.6g}, trend {model.trend:.6g}, "
          f"noise {model.noise_variance:.3g}; model written to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    _need(args, "model", "data", "out")
    model = GPModel.load(args.model)
    ds = read_csv(args.data, model.schema, require_response=False)
    mean, var = model.predict(ds.X, ds.U)
    write_csv(args.out, model.schema, ds.X, ds.U, extra={"mean": mean, "variance": var})
    return EXIT_OK


def cmd_design(args) -> int:
    _need(args, "out")
    if args.config:
        schema = load_config(args.config).schema
    else:
        cont = tuple(f"x{i + 1}" for i in range(args.dim))
        cats = () if args.kind in ("lhs", "grid") else (("u", args.levels),)
        schema = InputSchema(cont, cats)
    I = schema.n_continuous
    if args.kind in ("slhd", "stratified"):
        if not schema.n_categorical:
            raise UsageError(f"a {args.kind} design needs a categorical input")
        if not args.cross and schema.n_categorical > 1:
            raise UsageError("several categorical inputs: pass --cross to stratify on all level combinations")
        levels = list(schema.level_counts) if args.cross else schema.level_counts[0]
        if args.kind == "slhd":
            d = slhd(args.m, levels, I, seed=args.seed, jitter=args.jitter)
        else:
            d = stratified_regular(args.m, levels, I)
    elif args.kind == "lhs":
        d = lhs(args.n, I, seed=args.seed, jitter=args.jitter)
    else:
        d = grid(args.n, I)
    if d.U.shape[1] != schema.n_categorical:
        raise UsageError(f"design has {d.U.shape[1]} categorical columns, schema declares {schema.n_categorical}")
    d.write_csv(args.out, schema)
    print(f"{d.provenance} design with {d.n} points written to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    _need(args, "out")
    if args.preset:
        bench = builtin_config(args.preset)
    elif args.config:
        cfg = load_config(args.config)
        if not cfg.benchmark:
            raise ConfigError(f"{args.config}: section 'benchmark' is missing")
        bench = BenchmarkConfig.from_dict(cfg.benchmark, cfg.fit)
    else:
        raise UsageError("benchmark needs --config or --preset")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.repetitions is not None:
        overrides["repetitions"] = args.repetitions
    if args.threads is not None:
        overrides["processes"] = args.threads
    if overrides:
        bench = BenchmarkConfig(**{**bench.__dict__, **overrides})
    variants = args.variants.split(",") if args.variants else None
    report = run_benchmark(bench, args.out, variants)
    for v in report.config.variants:
        print(f"{v.name:>16}: median Q2 {report.median(v.name):.4f}, IQR {report.iqr(v.name):.4f}")
    return EXIT_OK


def cmd_export_correlation(args) -> int:
    _need(args, "model", "out")
    model = GPModel.load(args.model)
    mats = model.categorical_matrices() if args.covariance else model.categorical_correlations()
    if not mats:
        raise UsageError("the model has no categorical inputs")
    name = args.input or next(iter(mats))
    if name not in mats:
        raise UsageError(f"--input: no categorical input {name!r}; choose from {sorted(mats)}")
    M = mats[name]
    write_matrix_csv(args.out, M, [f"{name}{l}" for l in range(1, M.shape[0] + 1)])
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "design": cmd_design,
    "benchmark": cmd_benchmark,
    "export-correlation": cmd_export_correlation,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--data", type=Path, help="input CSV (dataset, points or matrix)")
    common.add_argument("--out", type=Path, help="output file or directory")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--threads", type=int, help="worker processes for the benchmark")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gcsgp", description="GP regression with group-structured categorical kernels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a block covariance matrix (GCS structure, PSD/PD)")
    s.add_argument("--groups", help="group sizes, e.g. 4,3,3 (CSV matrices)")

    sub.add_parser("fit", parents=[common], help="fit a GP model to a dataset CSV")

    s = sub.add_parser("predict", parents=[common], help="predict with a saved model")
    s.add_argument("--model", type=Path, help="model JSON written by 'fit'")

    s = sub.add_parser("design", parents=[common], help="generate a design of experiments as CSV")
    s.add_argument("--kind", choices=["slhd", "stratified", "lhs", "grid"], default="slhd")
    s.add_argument("--m", type=int, default=3, help="points per level (slhd, stratified)")
    s.add_argument("--n", type=int, default=10, help="number of points (lhs) or points per axis (grid)")
    s.add_argument("--levels", type=int, default=2, help="level count when no --config is given")
    s.add_argument("--dim", type=int, default=1, help="continuous dimension when no --config is given")
    s.add_argument("--jitter", action="store_true", help="uniform position inside bins instead of centres")
    s.add_argument("--cross", action="store_true", help="stratify on all categorical level combinations")

    s = sub.add_parser("benchmark", parents=[common], help="run a repeated design/fit/Q2 benchmark")
    s.add_argument("--preset", choices=["example1", "example2"])
    s.add_argument("--repetitions", type=int)
    s.add_argument("--variants", help="comma-separated subset of variant names")

    s = sub.add_parser("export-correlation", parents=[common], help="write a fitted categorical matrix as CSV")
    s.add_argument("--model", type=Path, help="model JSON written by 'fit'")
    s.add_argument("--input", help="categorical input name (default: the first)")
    s.add_argument("--covariance", action="store_true", help="export the covariance instead of the correlation")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gcsgp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FitError, NumericalError) as exc:
        print(f"gcsgp {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (DomainError, ValueError, OSError) as exc:
        print(f"gcsgp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
