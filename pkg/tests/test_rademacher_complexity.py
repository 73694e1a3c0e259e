# -*- coding: utf-8 -*-
import logging

import numpy as np
import pytest

from base_kernels import gram
from circles_data import gen_circles
from errors import DatasetParseError, InvalidArgumentError
from graph_laplacian import build_graph
from rademacher_complexity import (
    ComplexityCurve,
    complexity_curve,
    elbow_select,
    load_curve_csv,
    log_mu_grid,
    rad_bounds_base,
    rad_empirical_mc,
    rad_lower_mr,
    rad_upper_mr,
    rademacher_draws,
    save_curve_csv,
)


def test_base_bounds_for_gaussian_diagonal():
    bound = rad_bounds_base(2.0, np.ones(16))
    assert bound.upper == pytest.approx(2.0 / 4.0)
    assert bound.lower == pytest.approx(bound.upper / np.sqrt(2.0))
    assert bound.n == 16


def test_base_bounds_reject_bad_input():
    with pytest.raises(InvalidArgumentError):
        rad_bounds_base(0.0, np.ones(3))
    with pytest.raises(InvalidArgumentError):
        rad_bounds_base(1.0, [])
    with pytest.raises(InvalidArgumentError):
        rad_bounds_base(1.0, [1.0, -0.5])


def test_mr_bound_without_deformation_is_the_base_bound():
    diag = np.array([1.0, 0.5, 2.0])
    assert rad_upper_mr(1.5, diag, np.zeros(3)) == pytest.approx(rad_bounds_base(1.5, diag).upper)
    assert rad_lower_mr(1.5, diag, np.zeros(3)) == pytest.approx(rad_bounds_base(1.5, diag).lower)


def test_mr_bound_clamps_negative_residuals(caplog):
    with caplog.at_level(logging.WARNING):
        value = rad_upper_mr(1.0, np.array([1.0, 1.0]), np.array([0.0, 1.5]))
    assert value == pytest.approx(0.5)
    assert "截断" in caplog.text


def test_monte_carlo_lies_between_the_bounds(rng):
    for _ in range(100):
        n = int(rng.integers(1, 21))
        A = rng.normal(size=(n, n))
        K = A @ A.T
        draws = rademacher_draws(1.0, K, 10_000, seed=int(rng.integers(1 << 30)))
        se = draws.std(ddof=1) / np.sqrt(draws.size)
        bound = rad_bounds_base(1.0, np.diag(K))
        # n = 1 时每次抽样都等于上界, se = 0, 只留舍入误差的余量
        assert bound.lower - 3 * se <= draws.mean() <= bound.upper * (1 + 1e-12) + 3 * se


def test_single_point_is_tight_at_the_upper_bound():
    K = np.array([[2.5]])
    assert rad_empirical_mc(1.0, K, 100, seed=1) == pytest.approx(rad_bounds_base(1.0, [2.5]).upper)


def test_draws_are_reproducible(base_kernel, rng):
    G = gram(base_kernel, rng.normal(size=(8, 2)))
    first = rademacher_draws(1.0, G, 50, seed=3)
    assert first.shape == (50,)
    np.testing.assert_array_equal(first, rademacher_draws(1.0, G, 50, seed=3))
    with pytest.raises(InvalidArgumentError):
        rademacher_draws(1.0, G, 0)


def test_log_grid():
    grid = log_mu_grid()
    assert grid.size == 25
    assert grid[0] == pytest.approx(1e-3) and grid[-1] == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        log_mu_grid(1.0, 0.1, 5)


def test_curve_is_non_increasing(base_kernel, small_circles, small_graph):
    curve = complexity_curve(
        1.0, base_kernel, small_circles.points, small_graph.L, np.arange(small_circles.n), log_mu_grid(1e-3, 10.0, 12)
    )
    assert curve.valid.all()
    assert np.all(np.diff(curve.upper_values) <= 1e-10)
    assert np.all(curve.upper_values <= curve.base_upper + 1e-12)
    np.testing.assert_allclose(curve.lower_values, curve.upper_values / np.sqrt(2.0))
    assert np.all(curve.reduction >= -1e-12)
    assert curve.elbow_index is not None
    assert 0 < curve.elbow_index < 11


def test_curve_is_independent_of_worker_count(base_kernel, small_circles, small_graph):
    args = (1.0, base_kernel, small_circles.points, small_graph.L, np.arange(small_circles.n), log_mu_grid(1e-2, 1.0, 6))
    serial = complexity_curve(*args, max_workers=1)
    threaded = complexity_curve(*args, max_workers=3)
    np.testing.assert_allclose(serial.upper_values, threaded.upper_values, rtol=1e-12)
    assert serial.elbow_index == threaded.elbow_index


def test_curve_rejects_bad_grid(base_kernel, small_circles, small_graph):
    with pytest.raises(InvalidArgumentError):
        complexity_curve(1.0, base_kernel, small_circles.points, small_graph.L, [0, 1], [0.5, 0.1])
    with pytest.raises(InvalidArgumentError):
        complexity_curve(1.0, base_kernel, small_circles.points, small_graph.L, [0, 1], [0.0, 0.1])


def _synthetic(values, errors=None):
    values = np.asarray(values, dtype=float)
    return ComplexityCurve(
        mu_grid=np.logspace(-3, 0, values.size),
        upper_values=values,
        lower_values=values / np.sqrt(2.0),
        errors=errors or {},
    )


def test_elbow_picks_the_knee():
    curve = _synthetic([1.0, 0.5, 0.3, 0.28, 0.27, 0.26, 0.25])
    assert elbow_select(curve) == 2


def test_elbow_tie_takes_the_smallest_mu():
    x = np.linspace(-3.0, 0.0, 7)
    curve = _synthetic(1.0 - 0.1 * (x + 3.0))
    assert elbow_select(curve) == 1


def test_elbow_skips_failed_points():
    values = np.array([1.0, 0.5, np.nan, 0.28, 0.27, 0.26, 0.25])
    curve = _synthetic(values, errors={2: "singular"})
    assert elbow_select(curve) != 2
    assert elbow_select(curve) == 1


def test_elbow_needs_three_valid_points():
    with pytest.raises(InvalidArgumentError):
        elbow_select(_synthetic([1.0, 0.5]))
    with pytest.raises(InvalidArgumentError):
        elbow_select(_synthetic([1.0, np.nan, 0.5], errors={1: "singular"}))


def test_curve_csv_round_trip(tmp_path):
    curve = _synthetic([1.0, 0.5, np.nan, 0.28, 0.27], errors={2: "singular"})
    curve.elbow_index = 1
    path = tmp_path / "curve.csv"
    save_curve_csv(curve, path, header_lines=["config: {}"])
    assert path.read_text().startswith("# config: {}\nmu,upper,lower,selected,valid,error\n")
    loaded = load_curve_csv(path)
    np.testing.assert_array_equal(loaded.mu_grid, curve.mu_grid)
    assert loaded.elbow_index == 1
    assert set(loaded.errors) == {2}
    assert np.isnan(loaded.upper_values[2])
    assert elbow_select(loaded) == elbow_select(curve)


def test_curve_csv_keeps_every_bit(tmp_path, rng):
    values = np.sort(rng.uniform(0.1, 1.0, 9))[::-1] + 1e-16 * rng.normal(size=9)
    values[4] = np.nan
    curve = ComplexityCurve(
        mu_grid=log_mu_grid(1e-3, 1.0, 9),
        upper_values=values,
        lower_values=values / np.sqrt(2.0),
        errors={4: "singular"},
    )
    path = tmp_path / "curve.csv"
    save_curve_csv(curve, path)
    loaded = load_curve_csv(path)
    np.testing.assert_array_equal(loaded.mu_grid, curve.mu_grid)
    np.testing.assert_array_equal(loaded.upper_values, curve.upper_values)
    np.testing.assert_array_equal(loaded.lower_values, curve.lower_values)


def test_curve_csv_rejects_bad_cells(tmp_path):
    path = tmp_path / "curve.csv"
    path.write_text("mu,upper,lower,selected,valid,error\n0.1,1,0.7,0,1,\n0.2,0.9,0.6,0,yes,\n")
    with pytest.raises(DatasetParseError) as info:
        load_curve_csv(path)
    assert info.value.row == 3

    path.write_text("mu,upper,lower,selected\nabc,1,0.7,0\n")
    with pytest.raises(DatasetParseError):
        load_curve_csv(path)


@pytest.mark.slow
def test_circles_curve_on_the_dense_graph(base_kernel):
    """500 点同心圆, sigma=0.5, sigma_w=0.2, r=1, mu 取 [1e-3, 1] 上 25 个对数点

    曲线单调下降, 前段比后段陡; 稠密图上拐点落在 mu ~ 0.0075, 早于 0.1。
    """
    ds = gen_circles(250, seed=0)
    gl = build_graph(ds.points, 0.2)
    curve = complexity_curve(1.0, base_kernel, ds.points, gl.L, np.arange(ds.n_total), log_mu_grid(), max_workers=4)
    assert curve.valid.all()
    assert np.all(np.diff(curve.upper_values) <= 1e-10)

    x = np.log10(curve.mu_grid)
    y = curve.upper_values / curve.upper_values[0]
    steep = (x <= -1.0 + 1e-12)
    flat = (curve.mu_grid >= 0.2 - 1e-12)
    steep_slope = abs(y[steep][-1] - y[steep][0]) / (x[steep][-1] - x[steep][0])
    flat_slope = abs(y[flat][-1] - y[flat][0]) / (x[flat][-1] - x[flat][0])
    assert steep_slope > flat_slope
    assert curve.selected_mu < 0.1
