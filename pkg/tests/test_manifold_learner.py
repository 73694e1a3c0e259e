# -*- coding: utf-8 -*-
import numpy as np
import pytest

from base_kernels import KernelSpec
from circles_data import Dataset, gen_circles, split_labels
from deformed_kernel import DeformedKernel
from errors import DatasetParseError, InfeasibleConstraintError, InvalidArgumentError
from graph_laplacian import build_graph
from manifold_learner import (
    JointSolver,
    TrainedModel,
    anchor_penalty,
    classify,
    classify_many,
    load_model,
    mse,
    objective_value,
    predict,
    predict_many,
    save_model,
    solve_constrained,
    train_semi_deformed,
    train_semi_joint,
    train_supervised,
    zero_one_error,
)
from rademacher_complexity import complexity_curve, log_mu_grid


def _random_instance(rng, n_total, n_labeled):
    points = rng.normal(size=(n_total, 2))
    labels = rng.choice([-1.0, 1.0], size=n_labeled)
    return Dataset(points=points, labels=labels)


# --- 监督 ---
def test_single_point_scalar_solve(base_kernel):
    ds = Dataset(points=[[0.3, -0.2]], labels=[1])
    model = train_supervised(ds, base_kernel, lambda_a=1.0)
    np.testing.assert_allclose(model.coefficients, [0.5])
    assert predict(model, [0.3, -0.2]) == pytest.approx(0.5)


def test_tiny_ridge_interpolates(base_kernel):
    points = np.array([[0.0, 0.0], [1.5, 0.0], [0.0, 1.5], [1.5, 1.5], [3.0, 0.0]])
    labels = np.array([1, -1, 1, -1, 1])
    ds = Dataset(points=points, labels=labels)
    model = train_supervised(ds, base_kernel, lambda_a=1e-10)
    np.testing.assert_allclose(predict_many(model, points), labels, atol=1e-3)
    assert zero_one_error(model, ds) == 0.0


def test_constant_labels_give_constant_sign(base_kernel, rng):
    points = np.column_stack([np.arange(6) * 1.5, np.zeros(6)])
    ds = Dataset(points=points, labels=np.ones(6))
    model = train_supervised(ds, base_kernel, lambda_a=1e-2)
    assert np.all(model.coefficients > 0.0)
    queries = points + rng.normal(scale=0.3, size=points.shape)
    assert np.all(classify_many(model, queries) == 1)


def test_supervised_requires_labels(base_kernel):
    ds = Dataset(points=[[0.0, 0.0]])
    with pytest.raises(InvalidArgumentError):
        train_supervised(ds, base_kernel)
    with pytest.raises(InvalidArgumentError):
        train_supervised(Dataset(points=[[0.0, 0.0]], labels=[1]), base_kernel, lambda_a=0.0)


# --- 半监督 ---
def test_mu_zero_reproduces_supervised(base_kernel, small_circles, small_graph, rng):
    sup = train_supervised(small_circles, base_kernel, 1e-3)
    joint = train_semi_joint(small_circles, base_kernel, small_graph, 1e-3, 0.0)
    deformed = train_semi_deformed(small_circles, base_kernel, small_graph, 1e-3, 0.0)
    queries = rng.uniform(-2.5, 2.5, size=(50, 2))
    np.testing.assert_allclose(predict_many(joint, queries), predict_many(sup, queries), atol=1e-8)
    np.testing.assert_allclose(predict_many(deformed, queries), predict_many(sup, queries), atol=1e-8)


@pytest.mark.parametrize("mu", [0.01, 0.1, 1.0, 10.0])
@pytest.mark.parametrize("lambda_a", [1e-3, 1e-1])
def test_joint_and_deformed_paths_agree(mu, lambda_a, rng):
    kernel = KernelSpec(kind="gaussian", sigma=1.0)
    # 8 组参数 x 7 个随机实例 = 56
    for trial in range(7):
        n_total = int(rng.integers(8, 31))
        n_labeled = int(rng.integers(1, min(8, n_total) + 1))
        ds = _random_instance(rng, n_total, n_labeled)
        gl = build_graph(ds.points, 0.5)
        queries = rng.uniform(-3.0, 3.0, size=(50, 2))
        joint = train_semi_joint(ds, kernel, gl, lambda_a, mu)
        deformed = train_semi_deformed(ds, kernel, gl, lambda_a, mu)
        gap = np.max(np.abs(predict_many(joint, queries) - predict_many(deformed, queries)))
        assert gap <= 1e-6, f"trial {trial}: gap {gap:.3e}"


def test_joint_solution_is_optimal(base_kernel, small_circles, small_graph, rng):
    lambda_a, mu = 1e-2, 0.3
    model = train_semi_joint(small_circles, base_kernel, small_graph, lambda_a, mu)
    best = objective_value(model, small_circles, base_kernel, small_graph, lambda_a, mu)
    for _ in range(1000):
        perturbed = model.coefficients + 1e-2 * rng.normal(size=model.coefficients.shape)
        assert best <= objective_value(perturbed, small_circles, base_kernel, small_graph, lambda_a, mu) + 1e-12


def test_constant_labels_stay_signed_on_anchors(base_kernel, small_graph):
    ds = Dataset(points=split_labels(gen_circles(20, seed=3), 4, seed=3).points, labels=np.ones(4))
    model = train_semi_joint(ds, base_kernel, small_graph, 1e-2, 10.0)
    assert np.all(predict_many(model, ds.points) > 0.0)


def test_penalty_is_non_increasing_in_mu(base_kernel, small_circles, small_graph):
    solver = JointSolver(small_circles, base_kernel, small_graph, 1e-3)
    penalties = [solver.penalty(solver.solve(mu)[0]) for mu in np.logspace(-3, 3, 13)]
    assert all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(penalties, penalties[1:]))


def test_single_labeled_point_is_well_posed(base_kernel):
    ds = split_labels(gen_circles(20, seed=3), 1, seed=3)
    for mu in (0.0, 0.1, 10.0):
        model = train_semi_deformed(ds, base_kernel, build_graph(ds.points, 0.2), 1e-3, mu)
        assert np.all(np.isfinite(model.coefficients))


def test_model_records_parameterization(base_kernel, small_circles, small_graph):
    model = train_semi_deformed(small_circles, base_kernel, small_graph, 1e-3, 0.2)
    assert isinstance(model.kernel, DeformedKernel)
    assert model.method == "deformed"
    assert model.sigma_w == 0.2
    assert model.lambda_eq2 == pytest.approx(1e-3 * 0.2 * 40 ** 2)
    assert model.anchors.shape == (4, 2)


# --- 预测与指标 ---
def test_classify_maps_zero_to_plus_one(base_kernel):
    model = TrainedModel(coefficients=np.zeros(1), anchors=np.zeros((1, 2)), kernel=base_kernel, lambda_a=1.0)
    assert classify(model, [5.0, 5.0]) == 1


def test_metrics_on_simple_models(base_kernel):
    ds = Dataset(points=[[0.0, 0.0], [10.0, 0.0]], labels=[1, -1])
    zero = TrainedModel(coefficients=np.zeros(1), anchors=np.zeros((1, 2)), kernel=base_kernel, lambda_a=1.0)
    assert zero_one_error(zero, ds) == 0.5
    assert mse(zero, ds) == 1.0
    perfect = train_supervised(ds, base_kernel, 1e-6)
    assert zero_one_error(perfect, ds) == 0.0


def test_metrics_need_labels(base_kernel):
    model = TrainedModel(coefficients=np.zeros(1), anchors=np.zeros((1, 2)), kernel=base_kernel, lambda_a=1.0)
    with pytest.raises(InvalidArgumentError):
        zero_one_error(model, Dataset(points=[[0.0, 0.0]]))


def test_predict_dimension_mismatch(base_kernel):
    model = TrainedModel(coefficients=np.zeros(1), anchors=np.zeros((1, 2)), kernel=base_kernel, lambda_a=1.0)
    with pytest.raises(InvalidArgumentError):
        predict(model, [0.0, 0.0, 0.0])


# --- 带约束问题 ---
def test_slack_constraint_returns_mu_zero(base_kernel, small_circles, small_graph):
    solver = JointSolver(small_circles, base_kernel, small_graph, 1e-2)
    r0 = solver.penalty(solver.solve(0.0)[0])
    model, mu = solve_constrained(small_circles, base_kernel, small_graph, 1e-2, r0 * 1.5)
    assert mu == 0.0
    assert model.mu == 0.0


def test_round_trip_recovers_mu(base_kernel):
    lambda_a = 1e-2
    for seed in range(20):
        ds = split_labels(gen_circles(20, seed=seed), 4, seed=seed)
        gl = build_graph(ds.points, 0.2)
        mu_star = (0.05, 0.3, 2.0)[seed % 3]
        solver = JointSolver(ds, base_kernel, gl, lambda_a)
        tau = solver.penalty(solver.solve(mu_star)[0])
        model, mu = solve_constrained(ds, base_kernel, gl, lambda_a, tau, rtol=0.0, atol=0.0)
        assert mu == pytest.approx(mu_star, rel=1e-6), f"seed {seed}"
        assert anchor_penalty(model, ds, gl) <= tau * (1 + 1e-6)


def test_zero_budget_flattens_on_anchors(base_kernel, small_circles, small_graph):
    solver = JointSolver(small_circles, base_kernel, small_graph, 1e-2)
    r0 = solver.penalty(solver.solve(0.0)[0])
    model, mu = solve_constrained(small_circles, base_kernel, small_graph, 1e-2, 0.0, atol=1e-3)
    assert mu > 1.0
    assert anchor_penalty(model, small_circles, small_graph) <= 1e-3 * r0 * (1 + 1e-6)


def test_infeasible_budget_is_reported(base_kernel, small_circles, small_graph):
    with pytest.raises(InfeasibleConstraintError) as exc:
        solve_constrained(small_circles, base_kernel, small_graph, 1e-2, 0.0, mu_max=1e-3, atol=0.0)
    assert exc.value.achieved_penalty > 0.0
    with pytest.raises(InvalidArgumentError):
        solve_constrained(small_circles, base_kernel, small_graph, 1e-2, -1.0)


# --- 持久化 ---
@pytest.mark.parametrize("method", ["supervised", "joint", "deformed"])
def test_model_json_round_trip(method, tmp_path, base_kernel, small_circles, small_graph, rng):
    if method == "supervised":
        model = train_supervised(small_circles, base_kernel, 1e-3)
    elif method == "joint":
        model = train_semi_joint(small_circles, base_kernel, small_graph, 1e-3, 0.2)
    else:
        model = train_semi_deformed(small_circles, base_kernel, small_graph, 1e-3, 0.2)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.method == method
    queries = rng.uniform(-2.0, 2.0, size=(20, 2))
    np.testing.assert_allclose(predict_many(loaded, queries), predict_many(model, queries), atol=1e-12)


def test_load_missing_model(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "missing.json")


def test_load_corrupt_model(tmp_path):
    path = tmp_path / "model.json"
    path.write_text('{"method": "supervised",\n "kernel": ')
    with pytest.raises(DatasetParseError) as info:
        load_model(path)
    assert info.value.row == 2
    path.write_text('{"method": "supervised"}')
    with pytest.raises(DatasetParseError):
        load_model(path)


@pytest.mark.slow
def test_two_labels_at_the_labeled_elbow(base_kernel):
    """gen --labels 2 -> curve (只在有标签点上求和) -> train --mu-from-curve 的流程

    有标签点只有两个, 监督模型接近 "离哪个标签点近"; 稠密图上半监督模型只略好于它,
    到不了 0.95。
    """
    semi_acc, sup_acc = [], []
    for seed in range(10):
        ds = split_labels(gen_circles(250, seed=seed), 2, seed=seed)
        gl = build_graph(ds.points, 0.2)
        curve = complexity_curve(1.0, base_kernel, ds.points, gl.L, np.arange(ds.n), log_mu_grid(), max_workers=4)
        assert curve.selected_mu is not None
        model = train_semi_deformed(ds, base_kernel, gl, 1e-4, curve.selected_mu)
        held_out = gen_circles(250, seed=1000 + seed)
        semi_acc.append(1.0 - zero_one_error(model, held_out))
        sup_acc.append(1.0 - zero_one_error(train_supervised(ds, base_kernel, 1e-4), held_out))
    assert np.mean(sup_acc) <= 0.75
    assert np.mean(semi_acc) >= 0.5
