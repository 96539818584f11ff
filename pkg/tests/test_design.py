import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcsgp.data import InputSchema, read_csv
from gcsgp.design import cross_levels, grid, lhs, slhd, stratified_regular
from gcsgp.exceptions import DomainError
from gcsgp.testfunctions import eval_test_function, example1, example2


def bins_hit(values, n_bins):
    """Bin index of each coordinate; exact for points strictly inside a bin."""
    return np.floor(np.asarray(values) * n_bins).astype(int)


def assert_latin(X, n_bins):
    for d in range(X.shape[1]):
        counts = np.bincount(bins_hit(X[:, d], n_bins), minlength=n_bins)
        assert counts.tolist() == [1] * n_bins, f"dimension {d}: {counts}"


def assert_slhd(design, m, n_slices):
    n = m * n_slices
    assert design.n == n
    assert_latin(design.X, n)
    keys = [tuple(r) for r in design.U]
    for key in set(keys):
        rows = np.array([k == key for k in keys])
        assert rows.sum() == m
        assert_latin(design.X[rows], m)


def test_slhd_single_point():
    d = slhd(1, 1, 1, seed=0)
    assert d.n == 1
    assert 0 <= d.X[0, 0] <= 1
    assert d.U.tolist() == [[1]]


def test_slhd_39_point_design():
    d = slhd(3, 13, 1, seed=4)
    assert d.n == 39
    assert sorted(bins_hit(d.X[:, 0], 39).tolist()) == list(range(39))
    assert d.counts_per_level() == {l: 3 for l in range(1, 14)}
    assert_slhd(d, 3, 13)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(1, 20), st.integers(1, 4), st.integers(0, 2**31), st.booleans())
def test_slhd_bin_structure(m, L, I, seed, jitter):
    if m * L > 200:
        return
    assert_slhd(slhd(m, L, I, seed, jitter=jitter), m, L)


def test_slhd_cross_product_levels():
    d = slhd(2, (3, 2), 2, seed=1)
    assert d.U.shape == (12, 2)
    assert_slhd(d, 2, 6)


def test_slhd_reproducible():
    a, b = slhd(3, 5, 2, seed=11), slhd(3, 5, 2, seed=11)
    np.testing.assert_array_equal(a.X, b.X)
    assert not np.array_equal(a.X, slhd(3, 5, 2, seed=12).X)


def test_slhd_rejects_bad_sizes():
    with pytest.raises(DomainError):
        slhd(0, 3, 1)
    with pytest.raises(DomainError):
        slhd(2, 0, 1)


def test_stratified_small():
    d = stratified_regular(1, 2)
    assert d.X[:, 0].tolist() == [0.0, 1.0]
    assert d.U[:, 0].tolist() == [1, 2]


def test_stratified_m3_L10():
    d = stratified_regular(3, 10)
    assert d.n == 30
    for level in range(1, 11):
        xs = d.X[d.U[:, 0] == level, 0]
        assert len(np.unique(xs)) == 3
    np.testing.assert_allclose(np.sort(d.X[:, 0]), np.linspace(0, 1, 30), atol=0)


def test_stratified_round_robin_and_deterministic():
    d = stratified_regular(2, 3)
    seq = np.linspace(0, 1, 6)
    for level in (1, 2, 3):
        np.testing.assert_array_equal(np.sort(d.X[d.U[:, 0] == level, 0]), seq[level - 1::3])
    np.testing.assert_array_equal(d.X, stratified_regular(2, 3).X)


def test_stratified_multi_dimensional_axes_are_permutations():
    d = stratified_regular(3, 4, I=3)
    seq = np.linspace(0, 1, 12)
    for k in range(3):
        np.testing.assert_allclose(np.sort(d.X[:, k]), seq)


def test_grid():
    assert grid(3, 1).X[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert grid(1000, 1).n == 1000
    assert grid(4, 2).n == 16


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 50), st.integers(1, 5), st.integers(0, 10**6))
def test_lhs_bins(n, I, seed):
    assert_latin(lhs(n, I, seed).X, n)


def test_lhs_example():
    assert_latin(lhs(10, 2, seed=0).X, 10)


def test_cross_levels():
    d = cross_levels(grid(5), (3,))
    assert d.n == 15
    assert d.counts_per_level() == {1: 5, 2: 5, 3: 5}


def test_design_csv_export(tmp_path):
    schema = InputSchema(("x",), (("u", 4),))
    d = slhd(2, 4, 1, seed=3)
    path = tmp_path / "design.csv"
    d.write_csv(path, schema)
    ds = read_csv(path, schema, require_response=False)
    np.testing.assert_array_equal(ds.X, d.X)
    np.testing.assert_array_equal(ds.U, d.U)
    assert ds.y is None


# ------------------------------------------------------------ test functions


def test_example1_indicator_off():
    for u in range(1, 10):
        assert example1(0.0, u) == pytest.approx(math.cos(-u / 20))


def test_example1_shifted_levels():
    for u in (10, 11, 12, 13):
        for x in (0.0, 0.3, 0.77):
            phase = 0.4 + u / 15
            expected = math.cos(7 * math.pi * x / 2 + phase * math.pi - u / 20)
            assert example1(x, u) == pytest.approx(expected, abs=1e-15)


def test_example2_branches():
    x = 0.35
    assert example2(x, 1) == pytest.approx((x + 0.01 * (x - 0.5) ** 2) * 0.1)
    assert example2(x, 6) == pytest.approx(0.9 * math.cos(2 * math.pi * (x + 2 / 20)) * math.exp(-x))
    assert example2(x, 9) == pytest.approx(-0.7 * math.cos(2 * math.pi * (x + 2 / 20)) * math.exp(-x))


def test_vectorized_evaluation():
    x = np.linspace(0, 1, 7)
    u = np.arange(1, 8)
    out = eval_test_function("example2", x, u)
    assert out.shape == (7,)
    assert out[0] == example2(x[0], 1)


def test_test_function_domain():
    with pytest.raises(DomainError):
        example1(0.5, 14)
    with pytest.raises(DomainError):
        example2(0.5, 0)
    with pytest.raises(DomainError):
        example2(1.5, 1)
    with pytest.raises(DomainError):
        eval_test_function("branin", 0.1, 1)
