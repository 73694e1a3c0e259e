# -*- coding: utf-8 -*-
"""
base_kernels.py

基础正定核、Gram 矩阵和核向量。

高斯核的约定固定为 k(x, y) = exp(-||x - y||^2 / sigma),
"带宽 0.5" 指的就是这里的 sigma; 注意它不是 exp(-d^2 / (2 sigma^2))。
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from sklearn.metrics.pairwise import linear_kernel, rbf_kernel

from errors import InvalidArgumentError

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("gaussian", "linear")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    sigma: Optional[float] = 0.5

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise InvalidArgumentError(f"未知的核类型: {self.kind}")
        if self.kind == "gaussian":
            if self.sigma is None or not np.isfinite(self.sigma) or self.sigma <= 0.0:
                raise InvalidArgumentError(f"高斯核的 sigma 必须为正数, 实际 {self.sigma}")
            object.__setattr__(self, "sigma", float(self.sigma))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "sigma": self.sigma if self.kind == "gaussian" else None}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "KernelSpec":
        return cls(kind=data["kind"], sigma=data.get("sigma"))


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    spec: Any
    # 对称化之前的最大不对称量 (基础核为 0)
    asymmetry: float = 0.0

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def is_psd(self, rtol: float = 1e-8) -> bool:
        trace = float(np.trace(self.entries))
        return self.min_eigenvalue() >= -rtol * max(abs(trace), 1e-300)


def as_points(points, name: str = "points") -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidArgumentError(f"{name} 必须是非空的 (N, d) 点集, 实际形状 {arr.shape}")
    return arr


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[1] != b.shape[1]:
        raise InvalidArgumentError(f"维度不一致: {a.shape[1]} vs {b.shape[1]}")


def cross_kernel(spec: KernelSpec, xs, ys) -> np.ndarray:
    """矩阵形式 K[i, j] = k(xs_i, ys_j)"""
    xs = as_points(xs, "xs")
    ys = as_points(ys, "ys")
    _check_dims(xs, ys)
    if spec.kind == "gaussian":
        return rbf_kernel(xs, ys, gamma=1.0 / spec.sigma)
    return linear_kernel(xs, ys)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape or x.size == 0:
        raise InvalidArgumentError(f"维度不一致: {x.shape} vs {y.shape}")
    if spec.kind == "gaussian":
        diff = x - y
        return float(np.exp(-np.dot(diff, diff) / spec.sigma))
    return float(np.dot(x, y))


def gram(spec: KernelSpec, points) -> GramMatrix:
    """K_ij = k(x_i, x_j); 存储结果严格对称"""
    points = as_points(points)
    entries = cross_kernel(spec, points, points)
    entries = 0.5 * (entries + entries.T)
    if spec.kind == "gaussian":
        np.fill_diagonal(entries, 1.0)
    else:
        np.fill_diagonal(entries, np.einsum("ij,ij->i", points, points))
    entries.setflags(write=False)
    return GramMatrix(entries=entries, spec=spec)


def kernel_vector(spec: KernelSpec, anchors, x) -> np.ndarray:
    """k_x = (k(x_1, x), ..., k(x_N, x))^t"""
    anchors = as_points(anchors, "anchors")
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != anchors.shape[1]:
        raise InvalidArgumentError(f"维度不一致: {anchors.shape[1]} vs {x.shape[0]}")
    return cross_kernel(spec, anchors, x[None, :])[:, 0]


def kernel_diag(spec: KernelSpec, points) -> np.ndarray:
    points = as_points(points)
    if spec.kind == "gaussian":
        return np.ones(points.shape[0])
    return np.einsum("ij,ij->i", points, points)
