# -*- coding: utf-8 -*-
"""
manifold_learner.py

平方损失下的监督 / 半监督核学习器。

参数约定: mu 是变形 RKHS 里图惩罚的权重, 即 ||f||~^2 = ||f||_H^2 + mu f_U^t L f_U。
两条求解路径优化的是同一个目标

    (1/n) sum_i (f(x_i) - y_i)^2 + lambda_a (||f||_H^2 + mu f_U^t L f_U)

- joint:    在全部 n+m 个锚点上展开, (J^tJ K + lambda_a n I + lambda_a mu n L K) alpha = J^t y
- deformed: 用变形核 k~ 在有标签点上做岭回归, (K~_ll + lambda_a n I) beta = y

两者预测一致。与带约束问题 (R_hat(f) <= tau) 的对应关系通过对 mu 二分得到。
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from base_kernels import KernelSpec, as_points, cross_kernel, gram
from circles_data import Dataset
from deformed_kernel import DeformedKernel, build_deformed, deformed_cross, deformed_gram
from errors import DatasetParseError, InfeasibleConstraintError, InvalidArgumentError
from graph_laplacian import GraphLaplacian, build_graph, manifold_penalty
from linalg_utils import jittered_solve

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_A = 1e-4
MU_MAX = 1e6
MAX_BISECTION_STEPS = 80
RESIDUAL_LIMIT = 1e-8


@dataclass(frozen=True)
class TrainedModel:
    coefficients: np.ndarray
    anchors: np.ndarray
    kernel: Union[KernelSpec, DeformedKernel]
    lambda_a: float
    mu: float = 0.0
    method: str = "supervised"
    # 把惩罚写成 lambda_eq2 * R_hat(f) 时的等价权重: lambda_a * mu * (n+m)^2
    lambda_eq2: float = 0.0
    sigma_w: Optional[float] = None
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.coefficients.shape[0] != self.anchors.shape[0]:
            raise InvalidArgumentError("系数个数必须等于锚点个数")

    @property
    def base_spec(self) -> KernelSpec:
        return self.kernel.base if isinstance(self.kernel, DeformedKernel) else self.kernel


def _check_labeled(ds: Dataset) -> None:
    if ds.n < 1:
        raise InvalidArgumentError("训练至少需要一个有标签点")


def _check_lambda(lambda_a: float) -> None:
    if lambda_a is None or not np.isfinite(lambda_a) or lambda_a <= 0.0:
        raise InvalidArgumentError(f"lambda_a 必须为正数, 实际 {lambda_a}")


def _check_mu(mu: float) -> None:
    if mu is None or not np.isfinite(mu) or mu < 0.0:
        raise InvalidArgumentError(f"mu 必须为非负数, 实际 {mu}")


def _laplacian_matrix(gl, n_total: int) -> np.ndarray:
    L = gl.L if isinstance(gl, GraphLaplacian) else np.asarray(gl, dtype=float)
    if L.shape != (n_total, n_total):
        raise InvalidArgumentError(f"L 的形状 {L.shape} 与点数 {n_total} 不一致")
    return L


def _residual_check(A: np.ndarray, x: np.ndarray, b: np.ndarray, warnings: List[str]) -> None:
    residual = float(np.linalg.norm(A @ x - b)) / max(float(np.linalg.norm(b)), 1e-300)
    if residual > RESIDUAL_LIMIT:
        msg = f"线性系统相对残差 {residual:.3e} 超过 {RESIDUAL_LIMIT:g}"
        logger.warning(msg)
        warnings.append(msg)


def train_supervised(ds: Dataset, base: KernelSpec, lambda_a: float = DEFAULT_LAMBDA_A) -> TrainedModel:
    """(K_ll + lambda_a n I) alpha = y"""
    _check_labeled(ds)
    _check_lambda(lambda_a)
    n = ds.n
    X = ds.labeled_points
    y = ds.labels.astype(float)
    A = gram(base, X).entries + lambda_a * n * np.eye(n)
    alpha = jittered_solve(A, y, assume_a="pos")
    warnings: List[str] = []
    _residual_check(A, alpha, y, warnings)
    return TrainedModel(coefficients=alpha, anchors=X.copy(), kernel=base, lambda_a=lambda_a, warnings=warnings)


def _joint_system(ds: Dataset, K: np.ndarray, L: np.ndarray, lambda_a: float, mu: float) -> Tuple[np.ndarray, np.ndarray]:
    """(J^t J K + lambda_a n I + lambda_a mu n L K) alpha = J^t y

    常见写法是 (J^t J K + lambda_a n I + mu n L K), 那里的 mu 是独立的惩罚权重。
    这里 mu 统一表示变形 RKHS 范数 ||f||^2 + mu f_U^t L f_U 里的权重, 所以图项多乘一个
    lambda_a; 只有这样联合解才和变形核上的岭回归 (K~_ll + lambda_a n I) beta = y 一致。
    """
    n, N = ds.n, ds.n_total
    JtJK = np.zeros_like(K)
    JtJK[:n] = K[:n]
    A = JtJK + lambda_a * n * np.eye(N) + lambda_a * mu * n * (L @ K)
    rhs = np.zeros(N)
    rhs[:n] = ds.labels
    return A, rhs


class JointSolver:
    """固定数据、核与 lambda_a, 对不同 mu 反复求解; 基础 Gram 只算一次"""

    def __init__(self, ds: Dataset, base: KernelSpec, gl, lambda_a: float):
        self.ds = ds
        self.K = gram(base, ds.points).entries
        self.L = _laplacian_matrix(gl, ds.n_total)
        self.lambda_a = lambda_a

    def solve(self, mu: float) -> Tuple[np.ndarray, List[str]]:
        A, rhs = _joint_system(self.ds, self.K, self.L, self.lambda_a, mu)
        alpha = jittered_solve(A, rhs, assume_a="gen")
        warnings: List[str] = []
        _residual_check(A, alpha, rhs, warnings)
        return alpha, warnings

    def penalty(self, alpha: np.ndarray) -> float:
        f_U = self.K @ alpha
        return float(f_U @ self.L @ f_U) / self.ds.n_total ** 2


def train_semi_joint(
    ds: Dataset,
    base: KernelSpec,
    gl,
    lambda_a: float = DEFAULT_LAMBDA_A,
    mu: float = 0.0,
) -> TrainedModel:
    _check_labeled(ds)
    _check_lambda(lambda_a)
    _check_mu(mu)
    alpha, warnings = JointSolver(ds, base, gl, lambda_a).solve(mu)
    return TrainedModel(
        coefficients=alpha,
        anchors=ds.points.copy(),
        kernel=base,
        lambda_a=lambda_a,
        mu=float(mu),
        method="joint",
        lambda_eq2=lambda_a * mu * ds.n_total ** 2,
        sigma_w=getattr(gl, "sigma_w", None),
        warnings=warnings,
    )


def train_semi_deformed(
    ds: Dataset,
    base: KernelSpec,
    gl,
    lambda_a: float = DEFAULT_LAMBDA_A,
    mu: float = 0.0,
) -> TrainedModel:
    """在变形核 k~ 上做岭回归, 只用有标签点"""
    _check_labeled(ds)
    _check_lambda(lambda_a)
    _check_mu(mu)
    L = _laplacian_matrix(gl, ds.n_total)
    dk = build_deformed(base, ds.points, L, mu)
    n = ds.n
    X = ds.labeled_points
    y = ds.labels.astype(float)
    A = deformed_gram(dk, X).entries + lambda_a * n * np.eye(n)
    beta = jittered_solve(A, y, assume_a="pos")
    warnings = [dk.warning] if dk.warning else []
    _residual_check(A, beta, y, warnings)
    return TrainedModel(
        coefficients=beta,
        anchors=X.copy(),
        kernel=dk,
        lambda_a=lambda_a,
        mu=float(mu),
        method="deformed",
        lambda_eq2=lambda_a * mu * ds.n_total ** 2,
        sigma_w=getattr(gl, "sigma_w", None),
        warnings=warnings,
    )


# --- 预测与评估 ---
def predict_many(model: TrainedModel, points) -> np.ndarray:
    points = as_points(points)
    if points.shape[1] != model.anchors.shape[1]:
        raise InvalidArgumentError(f"维度不一致: {points.shape[1]} vs {model.anchors.shape[1]}")
    if isinstance(model.kernel, DeformedKernel):
        K = deformed_cross(model.kernel, points, model.anchors)
    else:
        K = cross_kernel(model.kernel, points, model.anchors)
    return K @ model.coefficients


def predict(model: TrainedModel, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(predict_many(model, x[None, :])[0])


def classify_many(model: TrainedModel, points) -> np.ndarray:
    return np.where(predict_many(model, points) >= 0.0, 1, -1)


def classify(model: TrainedModel, x) -> int:
    """sign(f(x)), sign(0) = +1"""
    return 1 if predict(model, x) >= 0.0 else -1


def _labeled_eval_set(ds: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    if ds.n < 1:
        raise InvalidArgumentError("评估需要有标签的数据集 (n = 0)")
    return ds.labeled_points, ds.labels.astype(float)


def zero_one_error(model: TrainedModel, ds: Dataset) -> float:
    X, y = _labeled_eval_set(ds)
    return float(np.mean(classify_many(model, X) != y))


def mse(model: TrainedModel, ds: Dataset) -> float:
    X, y = _labeled_eval_set(ds)
    return float(np.mean((predict_many(model, X) - y) ** 2))


def objective_value(model_or_alpha, ds: Dataset, base: KernelSpec, gl, lambda_a: float, mu: float) -> float:
    """joint 展开下的目标函数值 (1/n) sum (f - y)^2 + lambda_a (alpha^t K alpha + mu f_U^t L f_U)"""
    alpha = model_or_alpha.coefficients if isinstance(model_or_alpha, TrainedModel) else np.asarray(model_or_alpha)
    K = gram(base, ds.points).entries
    L = _laplacian_matrix(gl, ds.n_total)
    f_U = K @ alpha
    fit = float(np.mean((f_U[: ds.n] - ds.labels) ** 2))
    return fit + lambda_a * (float(alpha @ K @ alpha) + mu * float(f_U @ L @ f_U))


def anchor_penalty(model: TrainedModel, ds: Dataset, gl) -> float:
    """R_hat(f) = f_U^t L f_U / (n+m)^2"""
    if isinstance(gl, GraphLaplacian):
        return manifold_penalty(gl, predict_many(model, ds.points))
    L = _laplacian_matrix(gl, ds.n_total)
    f_U = predict_many(model, ds.points)
    return float(f_U @ L @ f_U) / ds.n_total ** 2


# --- 带约束问题 ---
def solve_constrained(
    ds: Dataset,
    base: KernelSpec,
    gl,
    lambda_a: float,
    tau: float,
    mu_max: float = MU_MAX,
    max_iter: int = MAX_BISECTION_STEPS,
    rtol: float = 1e-6,
    atol: float = 1e-10,
    xtol: float = 1e-12,
) -> Tuple[TrainedModel, float]:
    """min (1/n) sum (f - y)^2 s.t. R_hat(f) <= tau, 通过对 mu 二分 (R_hat(f_mu) 关于 mu 不增)

    可行判据: R_hat <= tau (1 + rtol) + atol * R_hat(f_0)。返回可行的最小 mu。
    """
    _check_labeled(ds)
    _check_lambda(lambda_a)
    if tau is None or not np.isfinite(tau) or tau < 0.0:
        raise InvalidArgumentError(f"tau 必须为非负数, 实际 {tau}")
    solver = JointSolver(ds, base, gl, lambda_a)
    N = ds.n_total

    def penalty(mu: float) -> Tuple[float, np.ndarray, List[str]]:
        alpha, warnings = solver.solve(mu)
        return solver.penalty(alpha), alpha, warnings

    def build(mu: float, alpha: np.ndarray, warnings: List[str]) -> TrainedModel:
        return TrainedModel(
            coefficients=alpha,
            anchors=ds.points.copy(),
            kernel=base,
            lambda_a=lambda_a,
            mu=float(mu),
            method="joint",
            lambda_eq2=lambda_a * mu * N ** 2,
            sigma_w=getattr(gl, "sigma_w", None),
            warnings=warnings,
        )

    r0, alpha0, warn0 = penalty(0.0)
    threshold = tau * (1.0 + rtol) + atol * r0
    if r0 <= threshold:
        logger.info(f"mu=0 已满足约束 (R_hat={r0:.6e} <= tau={tau:.6e})")
        return build(0.0, alpha0, warn0), 0.0

    r_hi, alpha_hi, warn_hi = penalty(mu_max)
    if r_hi > threshold:
        raise InfeasibleConstraintError(f"mu_max={mu_max:g} 时约束仍不可行 (tau={tau:.6e})", achieved_penalty=r_hi)

    lo, hi = 0.0, float(mu_max)
    best = (hi, alpha_hi, warn_hi)
    for step in range(max_iter):
        mid = 0.5 * (lo + hi)
        r_mid, alpha_mid, warn_mid = penalty(mid)
        if r_mid <= threshold:
            hi = mid
            best = (mid, alpha_mid, warn_mid)
        else:
            lo = mid
        if hi - lo <= xtol * hi:
            break
    mu_found, alpha, warnings = best
    logger.info(f"约束求解完成: mu={mu_found:.9g}, 迭代 {step + 1} 次")
    return build(mu_found, alpha, warnings), mu_found


# --- 模型持久化 ---
class DeformationRecord(BaseModel):
    anchors: List[List[float]]
    sigma_w: float = Field(gt=0.0)
    mu: float = Field(ge=0.0)


class ModelRecord(BaseModel):
    method: str
    kernel: Dict[str, Any]
    anchors: List[List[float]]
    coefficients: List[float]
    lambda_a: float
    mu: float
    lambda_eq2: float
    deformation: Optional[DeformationRecord] = None


def model_to_record(model: TrainedModel) -> ModelRecord:
    deformation = None
    if isinstance(model.kernel, DeformedKernel):
        if model.sigma_w is None:
            raise InvalidArgumentError("deformed 模型保存需要 sigma_w 以便加载时重建拉普拉斯矩阵")
        deformation = DeformationRecord(anchors=model.kernel.anchors.tolist(), sigma_w=model.sigma_w, mu=model.mu)
    return ModelRecord(
        method=model.method,
        kernel=model.base_spec.to_dict(),
        anchors=model.anchors.tolist(),
        coefficients=model.coefficients.tolist(),
        lambda_a=model.lambda_a,
        mu=model.mu,
        lambda_eq2=model.lambda_eq2,
        deformation=deformation,
    )


def model_from_record(record: ModelRecord) -> TrainedModel:
    base = KernelSpec.from_dict(record.kernel)
    kernel: Union[KernelSpec, DeformedKernel] = base
    sigma_w = None
    if record.deformation is not None:
        # 因子分解不持久化, 加载时重建
        U = np.asarray(record.deformation.anchors, dtype=float)
        sigma_w = record.deformation.sigma_w
        kernel = build_deformed(base, U, build_graph(U, sigma_w).L, record.deformation.mu)
    return TrainedModel(
        coefficients=np.asarray(record.coefficients, dtype=float),
        anchors=np.asarray(record.anchors, dtype=float),
        kernel=kernel,
        lambda_a=record.lambda_a,
        mu=record.mu,
        method=record.method,
        lambda_eq2=record.lambda_eq2,
        sigma_w=sigma_w,
    )


def save_model(model: TrainedModel, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.write_text(model_to_record(model).model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise OSError(f"写入模型失败 ({path}): {e}") from e
    logger.info(f"模型已保存: {path} (method={model.method})")


def load_model(path: Union[str, Path]) -> TrainedModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"模型文件不存在: {path}")
    try:
        record = ModelRecord.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise DatasetParseError(f"模型文件不是合法 JSON ({path}): {e.msg}", row=e.lineno) from None
    except ValidationError as e:
        raise DatasetParseError(f"模型文件字段不合法 ({path}): {e.error_count()} 处错误") from None
    return model_from_record(record)
