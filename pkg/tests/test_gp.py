import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from gcsgp.data import Dataset, InputSchema
from gcsgp.exceptions import DomainError, FitError, MetricError, NumericalError
from gcsgp.gp import FitConfig, GPModel, Likelihood, _model_from, fd_gradient, fit, neg_log_likelihood, q2
from gcsgp.kernels import (
    CategoricalLeaf,
    Combine,
    ContinuousKernel1D,
    ContinuousLeaf,
    CSKernel,
    Kernel,
)

SCHEMA = InputSchema(("x",), (("u", 4),))


def _template(L=4):
    return Kernel(Combine("product", (
        ContinuousLeaf(0, ContinuousKernel1D("matern52", 0.3)),
        CategoricalLeaf(0, CSKernel.from_cs(L, 1.0, 0.4)),
    )))


def _dataset(rng, n, L=4, noise=0.0):
    X = rng.uniform(size=(n, 1))
    U = rng.integers(1, L + 1, size=(n, 1))
    y = np.sin(4 * X[:, 0]) + 0.2 * U[:, 0] + noise * rng.normal(size=n)
    return Dataset(InputSchema(("x",), (("u", L),)), X, U, y)


def brute_nll(K, y):
    """Dense-inverse NLL with the generalized-least-squares constant trend."""
    Ki = np.linalg.inv(K)
    one = np.ones(len(y))
    mu = (one @ Ki @ y) / (one @ Ki @ one)
    r = y - mu
    _, logdet = np.linalg.slogdet(K)
    return 0.5 * r @ Ki @ r + 0.5 * logdet + 0.5 * len(y) * math.log(2 * math.pi)


def _full_gram(lik, vec):
    kernel, tau2 = lik.split(vec)
    K = kernel(lik.dataset.X, lik.dataset.U)
    K = 0.5 * (K + K.T)
    scale = np.mean(np.diag(K))
    return K + (tau2 + lik.config.nugget * scale) * np.eye(len(K))


# -------------------------------------------------------------- likelihood


def test_nll_single_point_zero_response():
    schema = InputSchema(("x",), ())
    ds = Dataset(schema, [[0.5]], np.zeros((1, 0), int), [0.0])
    tmpl = Kernel(ContinuousLeaf(0, ContinuousKernel1D("matern52", 0.3)))
    cfg = FitConfig(noise=0.0, nugget=0.0)
    assert neg_log_likelihood([0.0, math.log(0.3)], ds, tmpl, cfg) == pytest.approx(0.5 * math.log(2 * math.pi))


def test_nll_identity_gram_is_half_squared_residual():
    # distinct levels with zero between-level covariance give K = I
    schema = InputSchema((), (("u", 4),))
    y = np.array([0.3, -1.0, 2.0, 0.5])
    ds = Dataset(schema, np.zeros((4, 0)), [[1], [2], [3], [4]], y)
    tmpl = Kernel(CategoricalLeaf(0, CSKernel.from_cs(4, 1.0, 0.0)))
    lik = Likelihood(ds, tmpl, FitConfig(noise=0.0, nugget=0.0))
    vec = tmpl.pack()
    expected = 0.5 * np.sum((y - y.mean()) ** 2) + 2 * math.log(2 * math.pi)
    assert lik.value(vec) == pytest.approx(expected, abs=1e-12)


def test_nll_matches_dense_inverse_on_5_points(rng):
    ds = _dataset(rng, 5)
    tmpl = _template()
    lik = Likelihood(ds, tmpl, FitConfig())
    vec = np.concatenate([tmpl.pack(), [math.log(1e-3)]])
    assert lik.value(vec) == pytest.approx(brute_nll(_full_gram(lik, vec), ds.y), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 20), st.integers(0, 10_000))
def test_nll_matches_dense_inverse(n, seed):
    rng = np.random.default_rng(seed)
    ds = _dataset(rng, n, noise=0.1)
    tmpl = _template()
    lik = Likelihood(ds, tmpl, FitConfig())
    vec = rng.uniform(-1.5, 0.5, size=lik.n_params)
    vec[-1] = rng.uniform(-6, -1)
    nll = lik.value(vec)
    assert nll == pytest.approx(brute_nll(_full_gram(lik, vec), ds.y), abs=1e-8, rel=1e-10)


def test_objective_is_infinite_on_invalid_point(rng):
    ds = _dataset(rng, 8)
    lik = Likelihood(ds, _template())
    assert lik(np.full(lik.n_params, 50.0)) == np.inf
    assert lik(np.full(lik.n_params, np.nan)) == np.inf


def test_nugget_escalation_rescues_duplicated_points():
    schema = InputSchema(("x",), ())
    X = np.array([[0.2], [0.2], [0.7]])
    ds = Dataset(schema, X, np.zeros((3, 0), int), [1.0, 1.0, 0.0])
    tmpl = Kernel(ContinuousLeaf(0, ContinuousKernel1D("squared_exponential", 0.3)))
    lik = Likelihood(ds, tmpl, FitConfig(noise=0.0, nugget=0.0))
    _, _, fac = lik.factor(tmpl.pack())
    assert fac.nugget > 0
    assert np.isfinite(fac.nll)


def test_numerical_error_carries_diagnostics():
    from gcsgp.gp import _factorize

    K = -np.eye(3)  # no nugget up to the cap can make this positive definite
    with pytest.raises(NumericalError) as info:
        _factorize(K + 2.0, np.zeros(3), 0.0, 1e-8)
    assert info.value.diagnostics["nuggets_tried"][0] == 1e-8
    assert info.value.diagnostics["n"] == 3


def test_fd_gradient_on_quadratic():
    f = lambda x: float(x @ np.diag([1.0, 3.0]) @ x)
    g = fd_gradient(f, np.array([0.5, -1.0]))
    np.testing.assert_allclose(g, [1.0, -6.0], rtol=1e-6)


def test_fd_gradient_of_nll_agrees_with_finer_step(rng):
    ds = _dataset(rng, 12, noise=0.05)
    lik = Likelihood(ds, _template())
    x = np.concatenate([_template().pack(), [-4.0]])
    g1 = fd_gradient(lik, x, 1e-5)
    g2 = fd_gradient(lik, x, 1e-6)
    np.testing.assert_allclose(g1, g2, rtol=1e-4, atol=1e-6)


# --------------------------------------------------------------------- fit


def test_fit_requires_two_points():
    ds = Dataset(SCHEMA, [[0.1]], [[1]], [0.0])
    with pytest.raises(DomainError):
        fit(ds, _template())


def test_fit_zero_parameters_evaluates_template():
    from gcsgp.kernels.expr import Node

    class Fixed(Node):
        def inputs(self):
            return {("x", 0)}

        def carriers(self):
            return 1

        def evaluate(self, Xa, Ua, Xb, Ub):
            return np.exp(-np.abs(Xa[:, 0][:, None] - Xb[:, 0][None, :]))

        def diag(self, X, U):
            return np.ones(X.shape[0])

        def param_specs(self):
            return []

        def pack(self):
            return np.zeros(0)

        def unpack(self, vec):
            return self

    ds = Dataset(InputSchema(("x",), ()), [[0.1], [0.4], [0.9]], np.zeros((3, 0), int), [0.0, 1.0, 0.5])
    tmpl = Kernel(Fixed())
    cfg = FitConfig(noise=0.0, nugget=0.0)
    model = fit(ds, tmpl, cfg)
    K = np.exp(-np.abs(ds.X - ds.X.T))
    assert model.nll == pytest.approx(brute_nll(K, ds.y), abs=1e-12)
    assert model.restarts == []


def test_fit_is_deterministic(rng):
    ds = _dataset(rng, 20)
    a = fit(ds, _template(), FitConfig(n_starts=2, seed=5))
    b = fit(ds, _template(), FitConfig(n_starts=2, seed=5))
    np.testing.assert_array_equal(a.params, b.params)
    assert a.nll == b.nll


def test_fit_never_worse_than_any_start(rng):
    ds = _dataset(rng, 20)
    model = fit(ds, _template(), FitConfig(n_starts=3, seed=2))
    starts = [r["start_nll"] for r in model.restarts if r["start_nll"] is not None]
    assert model.nll <= min(starts) + 1e-9


def test_more_restarts_never_hurt(rng):
    ds = _dataset(rng, 20)
    one = fit(ds, _template(), FitConfig(n_starts=1, seed=9))
    three = fit(ds, _template(), FitConfig(n_starts=3, seed=9))
    assert three.nll <= one.nll + 1e-9


def test_gradient_optimizer_runs(rng):
    ds = _dataset(rng, 15)
    model = fit(ds, _template(), FitConfig(n_starts=1, seed=0, optimizer="gradient_fd"))
    assert model.nll <= model.restarts[0]["start_nll"]


def test_fit_error_when_every_start_fails(rng):
    ds = _dataset(rng, 6)
    cfg = FitConfig(n_starts=2, start_ranges={"log_variance": (40.0, 41.0)})
    with pytest.raises(FitError):
        fit(ds, _template(), cfg)


def test_fit_config_validation():
    with pytest.raises(DomainError):
        FitConfig(n_starts=0)
    with pytest.raises(DomainError):
        FitConfig(optimizer="bfgs")
    with pytest.raises(DomainError):
        FitConfig.from_dict({"restarts": 3})
    cfg = FitConfig.from_dict({"n_starts": 2, "start_ranges": {"log_noise": [-10, -8]}})
    assert FitConfig.from_dict(cfg.to_dict()) == cfg


# ----------------------------------------------------------------- predict


def test_interpolates_training_points(rng):
    ds = _dataset(rng, 15)
    model = fit(ds, _template(), FitConfig(n_starts=2, seed=1, noise=0.0))
    mean, var = model.predict(ds.X, ds.U)
    span = np.ptp(ds.y)
    assert np.max(np.abs(mean - ds.y)) <= 1e-4 * span
    assert np.all(var >= 0)
    nugget_scale = model.nugget * np.mean(model.kernel.diag(ds.X, ds.U))
    assert np.all(var <= model.noise_variance + nugget_scale + 1e-10)


def test_uncorrelated_point_predicts_trend():
    schema = InputSchema((), (("u", 3),))
    ds = Dataset(schema, np.zeros((4, 0)), [[1], [1], [2], [2]], [0.0, 0.2, 1.0, 1.1])
    tmpl = Kernel(CategoricalLeaf(0, CSKernel.from_cs(3, 1.0, 0.0)))
    cfg = FitConfig(noise=0.01)
    model = _model_from(Likelihood(ds, tmpl, cfg), tmpl.pack(), cfg, [])
    mean, var = model.predict(np.zeros((1, 0)), [[3]])
    assert mean[0] == pytest.approx(model.trend, abs=1e-12)
    assert var[0] == pytest.approx(model.kernel.diag(np.zeros((1, 0)), [[3]])[0], rel=1e-12)


def test_two_point_matern_closed_form():
    schema = InputSchema(("x",), ())
    ds = Dataset(schema, [[0.2], [0.6]], np.zeros((2, 0), int), [1.0, 3.0])
    ell, s2 = 0.5, 2.0
    tmpl = Kernel(ContinuousLeaf(0, ContinuousKernel1D("matern52", ell)), variance=s2)
    cfg = FitConfig(noise=0.0, nugget=0.0)
    lik = Likelihood(ds, tmpl, cfg)
    model = _model_from(lik, tmpl.pack(), cfg, [])

    def m52(d):
        r = math.sqrt(5) * abs(d) / ell
        return (1 + r + r * r / 3) * math.exp(-r)

    rho = m52(0.4)
    K = s2 * np.array([[1, rho], [rho, 1]])
    y = np.array([1.0, 3.0])
    mu = 2.0  # symmetric 2x2 system: GLS mean is the plain average
    k = s2 * np.array([m52(0.5 - 0.2), m52(0.5 - 0.6)])
    det = K[0, 0] * K[1, 1] - K[0, 1] ** 2
    Kinv = np.array([[K[1, 1], -K[0, 1]], [-K[1, 0], K[0, 0]]]) / det
    mean_expected = mu + k @ Kinv @ (y - mu)
    var_expected = s2 - k @ Kinv @ k
    mean, var = model.predict([[0.5]], None)
    assert model.trend == pytest.approx(mu, abs=1e-14)
    assert mean[0] == pytest.approx(mean_expected, abs=1e-12)
    assert var[0] == pytest.approx(var_expected, abs=1e-12)


def test_predict_rejects_out_of_range_level(rng):
    ds = _dataset(rng, 10)
    model = fit(ds, _template(), FitConfig(n_starts=1))
    with pytest.raises(DomainError):
        model.predict([[0.5]], [[5]])


def test_model_roundtrip_bit_consistent(rng, tmp_path):
    ds = _dataset(rng, 18)
    model = fit(ds, _template(), FitConfig(n_starts=2, seed=3))
    path = tmp_path / "model.json"
    model.save(path)
    again = GPModel.load(path)
    Xt = rng.uniform(size=(50, 1))
    Ut = rng.integers(1, 5, size=(50, 1))
    m1, v1 = model.predict(Xt, Ut)
    m2, v2 = again.predict(Xt, Ut)
    np.testing.assert_array_equal(m1, m2)
    np.testing.assert_array_equal(v1, v2)
    assert again.nll == model.nll
    assert abs(model.recompute_nll() - model.nll) <= 1e-8
    assert np.all(np.diag(model.chol) > 0)
    np.testing.assert_array_equal(model.chol, np.tril(model.chol))


def test_categorical_matrix_export(rng):
    ds = _dataset(rng, 12)
    model = fit(ds, _template(), FitConfig(n_starts=1))
    T = model.categorical_matrices()["u"]
    R = model.categorical_correlations()["u"]
    assert T.shape == (4, 4)
    np.testing.assert_allclose(np.diag(R), 1.0)


def test_load_rejects_malformed(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(DomainError, match=":1"):
        GPModel.load(p)
    p.write_text('{"schema": {}}')
    with pytest.raises(DomainError):
        GPModel.load(p)


# ---------------------------------------------------------------------- q2


def test_q2_perfect_and_mean():
    y = [1.0, 2.0, 4.0]
    assert q2(y, y) == 1.0
    assert q2(y, [np.mean(y)] * 3) == pytest.approx(0.0, abs=1e-15)


def test_q2_hand_value():
    assert q2([0, 1, 2], [0, 1, 1]) == pytest.approx(0.5)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30), st.integers(0, 999))
def test_q2_at_most_one(values, seed):
    y = np.asarray(values)
    assume(np.sum((y - y.mean()) ** 2) > 1e-12)
    pred = y + np.random.default_rng(seed).normal(size=y.size)
    assert q2(y, pred) <= 1.0


def test_q2_errors():
    with pytest.raises(MetricError):
        q2([1, 1, 1], [1, 2, 3])
    with pytest.raises(MetricError):
        q2([1, 2], [1])
    with pytest.raises(MetricError):
        q2([1], [1])
