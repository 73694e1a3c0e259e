# -*- coding: utf-8 -*-
"""
graph_laplacian.py

稠密全连接权重图 W_ij = exp(-||x_i - x_j||^2 / sigma_w), 非归一化拉普拉斯 L = D - W,
以及流形惩罚项 f_U^t L f_U / (n+m)^2。

恒等式 f^t L f = 1/2 * sum_{i,j} W_ij (f_i - f_j)^2 (对有序对求和) 带有 1/2 因子;
这里按 L = D - W 的定义实现。
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.metrics.pairwise import rbf_kernel

from errors import InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GraphLaplacian:
    W: np.ndarray
    D: np.ndarray
    L: np.ndarray
    sigma_w: Optional[float] = None

    @property
    def size(self) -> int:
        return int(self.L.shape[0])

    def degrees(self) -> np.ndarray:
        return np.diag(self.D).copy()


def weight_matrix(points, sigma_w: float) -> np.ndarray:
    if sigma_w is None or not np.isfinite(sigma_w) or sigma_w <= 0.0:
        raise InvalidArgumentError(f"sigma_w 必须为正数, 实际 {sigma_w}")
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    if points.ndim != 2 or points.shape[0] < 1:
        raise InvalidArgumentError(f"points 必须是非空的 (N, d) 点集, 实际形状 {points.shape}")
    W = rbf_kernel(points, gamma=1.0 / sigma_w)
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 1.0)
    return W


def laplacian(W, sigma_w: Optional[float] = None, atol: float = 1e-10) -> GraphLaplacian:
    """L = D - W, D_ii = sum_j W_ij; W 的对角线在 L 中相互抵消"""
    W = np.array(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InvalidArgumentError(f"W 必须是方阵, 实际形状 {W.shape}")
    if np.max(np.abs(W - W.T), initial=0.0) > atol:
        raise InvalidArgumentError("W 不对称 (超过 1e-10)")
    if np.any(W < 0.0):
        raise InvalidArgumentError("W 必须非负")

    off = W.copy()
    np.fill_diagonal(off, 0.0)
    off = 0.5 * (off + off.T)
    degrees = off.sum(axis=1) + np.diag(W)
    D = np.diag(degrees)
    L = np.diag(off.sum(axis=1)) - off
    for arr in (W, D, L):
        arr.setflags(write=False)
    return GraphLaplacian(W=W, D=D, L=L, sigma_w=sigma_w)


def build_graph(points, sigma_w: float) -> GraphLaplacian:
    return laplacian(weight_matrix(points, sigma_w), sigma_w=sigma_w)


def manifold_penalty(gl: GraphLaplacian, f_U) -> float:
    """R_hat = f_U^t L f_U / (n+m)^2"""
    f_U = np.asarray(f_U, dtype=float).ravel()
    if f_U.shape[0] != gl.size:
        raise InvalidArgumentError(f"f_U 长度 {f_U.shape[0]} 与 L 的维度 {gl.size} 不一致")
    return float(f_U @ gl.L @ f_U) / gl.size ** 2
