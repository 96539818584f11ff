"""Gaussian-process regression with a constant trend and Gaussian noise.

``y = mu + Z(w) + eps`` where ``Z`` has the kernel of a :class:`~gcsgp.kernels.Kernel`
and ``eps ~ N(0, tau^2)``. The trend ``mu`` is profiled out of the
likelihood; kernel hyperparameters and ``tau^2`` are estimated by
multi-start maximum likelihood in the unconstrained parameter space.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .data import Dataset, InputSchema
from .exceptions import DomainError, FitError, MetricError, NumericalError
from .kernels import Kernel
from .kernels.params import ParamSpec

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
NOISE_FLOOR = 1e-12
DEFAULT_NUGGET = 1e-10
MAX_NUGGET = 1e-4
# unconstrained coordinates beyond this bound are rejected (exp overflow guard)
PARAM_BOUND = 30.0

NOISE_SPEC = ParamSpec("log_noise", "log_noise", -18.0, -6.0)

@dataclass
class FitConfig:
    n_starts: int = 5
    optimizer: str = "nelder_mead"
    max_evals: int | None = None
    seed: int = 0
    noise: str | float = "fit"
    nugget: float = DEFAULT_NUGGET
    start_ranges: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n_starts) < 1:
            raise DomainError("n_starts must be >= 1")
        if self.optimizer not in ("nelder_mead", "gradient_fd"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")
        if self.noise != "fit" and not float(self.noise) >= 0:
            raise DomainError("fixed noise variance must be >= 0")
        if self.nugget < 0:
            raise DomainError("nugget must be >= 0")

    @property
    def fit_noise(self) -> bool:
        return self.noise == "fit"

    def to_dict(self) -> dict:
        return {
            "n_starts": self.n_starts,
            "optimizer": self.optimizer,
            "max_evals": self.max_evals,
            "seed": self.seed,
            "noise": self.noise,
            "nugget": self.nugget,
            "start_ranges": {k: list(v) for k, v in self.start_ranges.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        known = {"n_starts", "optimizer", "max_evals", "seed", "noise", "nugget", "start_ranges"}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"fit: unknown field(s) {sorted(unknown)}")
        kw = dict(d)
        if "start_ranges" in kw:
            kw["start_ranges"] = {k: tuple(v) for k, v in kw["start_ranges"].items()}
        return cls(**kw)


# ------------------------------------------------------------ factorization


@dataclass
class _Factor:
    chol: np.ndarray
    nugget: float
    trend: float
    alpha: np.ndarray
    nll: float


def _factorize(K_base: np.ndarray, y: np.ndarray, tau2: float, nugget: float) -> _Factor:
    """Cholesky of ``K + (tau2 + nugget * mean diag) I`` with nugget escalation, then the NLL."""
    n = y.size
    scale = float(np.mean(np.diag(K_base))) if n else 1.0
    if not np.isfinite(scale) or scale <= 0:
        raise NumericalError("kernel diagonal is not positive", {"mean_diag": scale})
    nug = nugget
    tried = []
    while True:
        K = K_base.copy()
        K[np.diag_indices_from(K)] += tau2 + nug * scale
        try:
            C = cholesky(K, lower=True, check_finite=False)
            if np.all(np.diag(C) > 0):
                break
        except np.linalg.LinAlgError:
            pass
        tried.append(nug)
        nug = max(nug * 10.0, 1e-12)
        if nug > MAX_NUGGET * (1 + 1e-9):
            raise NumericalError(
                "Cholesky factorization failed after nugget escalation",
                {"nuggets_tried": tried, "noise": tau2, "mean_diag": scale, "n": n},
            )
    ones = np.ones(n)
    Ki_y = cho_solve((C, True), y, check_finite=False)
    Ki_1 = cho_solve((C, True), ones, check_finite=False)
    trend = float(ones @ Ki_y / (ones @ Ki_1))
    r = y - trend
    alpha = Ki_y - trend * Ki_1
    nll = 0.5 * float(r @ alpha) + float(np.sum(np.log(np.diag(C)))) + 0.5 * n * LOG_2PI
    return _Factor(C, nug, trend, alpha, nll)


class Likelihood:
    """Negative log-likelihood as a function of the unconstrained parameter vector.

    The vector is the kernel's packed parameters followed by ``log tau^2`` when
    the noise is fitted.
    """

    def __init__(self, dataset: Dataset, template: Kernel, config: FitConfig | None = None):
        if dataset.y is None:
            raise DomainError("dataset has no response column")
        self.dataset = dataset
        self.template = template
        self.config = config or FitConfig()
        self.n_kernel = template.n_params

    @property
    def n_params(self) -> int:
        return self.n_kernel + int(self.config.fit_noise)

    def param_specs(self) -> list[ParamSpec]:
        specs = list(self.template.param_specs())
        if self.config.fit_noise:
            specs.append(NOISE_SPEC)
        return specs

    def split(self, vec) -> tuple[Kernel, float]:
        vec = np.asarray(vec, dtype=float)
        kernel = self.template.unpack(vec[: self.n_kernel]) if self.n_kernel else self.template
        if self.config.fit_noise:
            tau2 = max(float(np.exp(vec[self.n_kernel])), NOISE_FLOOR)
        else:
            tau2 = float(self.config.noise)
        return kernel, tau2

    def factor(self, vec) -> tuple[Kernel, float, _Factor]:
        kernel, tau2 = self.split(vec)
        if not kernel.is_valid():
            raise NumericalError("categorical matrix is not positive semidefinite", {"params": list(vec)})
        d = self.dataset
        K = kernel(d.X, d.U)
        return kernel, tau2, _factorize(0.5 * (K + K.T), d.y, tau2, self.config.nugget)

    def value(self, vec) -> float:
        return self.factor(vec)[2].nll

    def __call__(self, vec) -> float:
        vec = np.asarray(vec, dtype=float)
        if not np.all(np.isfinite(vec)) or np.any(np.abs(vec) > PARAM_BOUND):
            return np.inf
        try:
            return self.value(vec)
        except (NumericalError, DomainError, FloatingPointError, ValueError):
            return np.inf


def neg_log_likelihood(params, dataset: Dataset, template: Kernel, config: FitConfig | None = None) -> float:
    """NLL at an unconstrained parameter vector; raises :class:`NumericalError` on failure."""
    return Likelihood(dataset, template, config).value(params)


def fd_gradient(f, x, rel_step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient, one-sided where ``f`` is infinite on one side."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        fp, fm = f(x + e), f(x - e)
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2 * h)
        elif np.isfinite(fp) or np.isfinite(fm):
            f0 = f(x)
            g[i] = (fp - f0) / h if np.isfinite(fp) else (f0 - fm) / h
    return g


# ------------------------------------------------------------------- model


@dataclass(eq=False)
class GPModel:
    dataset: Dataset
    template: Kernel
    kernel: Kernel
    params: np.ndarray
    trend: float
    noise_variance: float
    nugget: float
    nll: float
    chol: np.ndarray
    alpha: np.ndarray
    config: FitConfig = field(default_factory=FitConfig)
    restarts: list = field(default_factory=list)

    @property
    def schema(self) -> InputSchema:
        return self.dataset.schema

    def predict(self, X, U) -> tuple[np.ndarray, np.ndarray]:
        """Kriging mean and variance of the latent process at new points."""
        X, U = self.schema.check_points(X, U)
        d = self.dataset
        Ks = self.kernel(X, U, d.X, d.U)
        mean = self.trend + Ks @ self.alpha
        V = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = self.kernel.diag(X, U) - np.sum(V * V, axis=0)
        return mean, np.maximum(var, 0.0)

    def categorical_matrices(self) -> dict[str, np.ndarray]:
        out = {}
        for leaf in self.kernel.categorical_leaves():
            name = self.schema.categorical[leaf.input][0]
            out[name] = leaf.matrix
        return out

    def categorical_correlations(self) -> dict[str, np.ndarray]:
        out = {}
        for name, T in self.categorical_matrices().items():
            sd = np.sqrt(np.diag(T))
            out[name] = T / np.outer(sd, sd)
        return out

    def recompute_nll(self) -> float:
        return Likelihood(self.dataset, self.template, self.config).value(self.params)

    # ---------------------------------------------------------- persistence

    def to_dict(self) -> dict:
        d = self.dataset
        return {
            "format": "gcsgp-model/1",
            "schema": self.schema.to_dict(),
            "template": self.template.to_dict(),
            "params": [float(v) for v in self.params],
            "param_names": [s.name for s in Likelihood(d, self.template, self.config).param_specs()],
            "kernel": self.kernel.to_dict(),
            "trend": self.trend,
            "noise_variance": self.noise_variance,
            "nugget": self.nugget,
            "nll": self.nll,
            "fit": self.config.to_dict(),
            "categorical_matrices": {k: v.tolist() for k, v in self.categorical_matrices().items()},
            "data": {"X": d.X.tolist(), "U": d.U.tolist(), "y": d.y.tolist()},
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_dict(cls, doc: dict) -> "GPModel":
        try:
            schema = InputSchema.from_dict(doc["schema"])
            data = doc["data"]
            dataset = Dataset(schema, np.asarray(data["X"], dtype=float), np.asarray(data["U"], dtype=int), np.asarray(data["y"]))
            template = Kernel.from_dict(doc["template"])
            config = FitConfig.from_dict(doc.get("fit", {}))
            params = np.asarray(doc["params"], dtype=float)
            nugget = float(doc["nugget"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed model document: {exc}") from exc
        lik = Likelihood(dataset, template, config)
        kernel, tau2 = lik.split(params)
        K = kernel(dataset.X, dataset.U)
        # reuse the stored nugget so the factor is reproduced exactly
        fac = _factorize(0.5 * (K + K.T), dataset.y, tau2, nugget)
        return cls(dataset, template, kernel, params, fac.trend, tau2, fac.nugget, fac.nll, fac.chol, fac.alpha, config)

    @classmethod
    def load(cls, path) -> "GPModel":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(doc)


def _start_ranges(specs: Sequence[ParamSpec], y: np.ndarray, overrides: dict) -> tuple[np.ndarray, np.ndarray]:
    var = float(np.var(y)) if y.size > 1 else 1.0
    var = var if var > 0 else 1.0
    lo, hi = [], []
    for s in specs:
        a, b = overrides.get(s.kind, (s.low, s.high))
        if s.kind in ("log_variance", "log_noise"):
            a, b = a + math.log(var), b + math.log(var)
        elif s.kind == "log_sd":
            a, b = a + 0.5 * math.log(var), b + 0.5 * math.log(var)
        elif s.kind == "offdiag":
            a, b = a * math.sqrt(var), b * math.sqrt(var)
        lo.append(a)
        hi.append(b)
    return np.asarray(lo), np.asarray(hi)


MAX_START_DRAWS = 200


def sample_starts(lik: Likelihood, n_starts: int, seed: int) -> list[tuple[np.ndarray, float]]:
    """Starting points drawn uniformly in the transformed space, with their NLL.

    Draws whose objective is infinite (e.g. an invalid categorical matrix)
    are redrawn, up to ``MAX_START_DRAWS`` times per restart; this samples
    the uniform distribution restricted to the feasible region. A restart
    that never finds a feasible point is returned with NLL ``inf``.
    """
    specs = lik.param_specs()
    lo, hi = _start_ranges(specs, lik.dataset.y, lik.config.start_ranges)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_starts):
        for _ in range(MAX_START_DRAWS):
            x0 = rng.uniform(lo, hi)
            f0 = lik(x0)
            if np.isfinite(f0):
                break
        out.append((x0, f0))
    return out


def _optimize(lik: Likelihood, x0: np.ndarray, config: FitConfig) -> tuple[np.ndarray, float, int]:
    n = x0.size
    max_evals = config.max_evals or max(2000, 200 * n)
    if config.optimizer == "nelder_mead":
        res = minimize(
            lik,
            x0,
            method="Nelder-Mead",
            options={"maxfev": max_evals, "xatol": 1e-6, "fatol": 1e-9, "adaptive": n > 4},
        )
    else:
        res = minimize(
            lik,
            x0,
            method="L-BFGS-B",
            jac=lambda x: fd_gradient(lik, x),
            bounds=[(-PARAM_BOUND, PARAM_BOUND)] * n,
            options={"maxfun": max_evals, "maxiter": max_evals},
        )
    return np.asarray(res.x, dtype=float), float(res.fun), int(res.nfev)


def _model_from(lik: Likelihood, vec, config, restarts) -> GPModel:
    kernel, tau2, fac = lik.factor(vec)
    return GPModel(
        lik.dataset, lik.template, kernel, np.asarray(vec, dtype=float), fac.trend, tau2,
        fac.nugget, fac.nll, fac.chol, fac.alpha, config, restarts,
    )


def fit(dataset: Dataset, template: Kernel, config: FitConfig | None = None) -> GPModel:
    """Multi-start maximum likelihood; returns the model at the lowest NLL found.

    Ties are broken by the lowest restart index.
    """
    config = config or FitConfig()
    if dataset.n < 2:
        raise DomainError("fitting needs at least two observations")
    lik = Likelihood(dataset, template, config)
    if lik.n_params == 0:
        return _model_from(lik, np.zeros(0), config, [])

    starts = sample_starts(lik, config.n_starts, config.seed)
    best_x, best_f = None, np.inf
    restarts = []
    for i, (x0, f0) in enumerate(starts):
        if not np.isfinite(f0):
            restarts.append({"start_nll": None, "nll": None, "nfev": 0})
            logger.debug("restart %d: infeasible starting point", i)
            continue
        x, f, nfev = _optimize(lik, x0, config)
        if not np.isfinite(f) or f > f0:
            x, f = x0, f0
        restarts.append({"start_nll": f0, "nll": f, "nfev": nfev})
        logger.debug("restart %d: nll %.6g -> %.6g (%d evals)", i, f0, f, nfev)
        if f < best_f:
            best_x, best_f = x, f
    if best_x is None:
        raise FitError(f"all {config.n_starts} restarts failed numerically")
    return _model_from(lik, best_x, config, restarts)


def q2(y_true, y_pred) -> float:
    """Out-of-sample coefficient of determination ``1 - SSE / SST``."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.size != y_pred.size:
        raise MetricError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size < 2:
        raise MetricError("Q2 needs at least two test points")
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    if sst == 0.0:
        raise MetricError("Q2 is undefined for a constant test response")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / sst
