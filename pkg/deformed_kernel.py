# -*- coding: utf-8 -*-
"""
deformed_kernel.py

流形正则化对应的 RKHS 核。新内积 <f, g>~ = <f, g>_H + f_U^t (mu L) g_U,
对应的核为

    k~(x, y) = k(x, y) - k_x^t (I/mu + L K)^{-1} L k_y,

其中 K = K_UU 是锚点集 U (全部 n+m 个点) 上的 Gram 矩阵。mu = 1 时就是
(I + LK)^{-1}; mu = 0 定义为未变形的核 (变形项按连续性取 0)。
(I/mu + LK) 不对称, 用 LU 分解并缓存; 构造之后对象只读, 可以跨线程共享。
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from base_kernels import GramMatrix, KernelSpec, as_points, cross_kernel, gram, kernel_diag
from errors import FactorizationError, InvalidArgumentError
from linalg_utils import Factorization, factorize

logger = logging.getLogger(__name__)

ASYMMETRY_LIMIT = 1e-6
DIAG_SLACK = 1e-10


@dataclass(frozen=True)
class DeformedKernel:
    base: KernelSpec
    anchors: np.ndarray
    L: np.ndarray
    mu: float
    K_UU: np.ndarray
    # (I/mu + L K)^{-1} L, mu = 0 或 L = 0 时为零矩阵
    deformation: np.ndarray
    solve_cache: Optional[Factorization] = None

    @property
    def size(self) -> int:
        return int(self.anchors.shape[0])

    @property
    def rcond(self) -> Optional[float]:
        return None if self.solve_cache is None else self.solve_cache.rcond

    @property
    def warning(self) -> Optional[str]:
        return None if self.solve_cache is None else self.solve_cache.warning

    @property
    def is_trivial(self) -> bool:
        return self.solve_cache is None


def build_deformed(
    base: KernelSpec,
    anchors,
    L,
    mu: float,
    base_gram: Optional[np.ndarray] = None,
) -> DeformedKernel:
    """分解 (I/mu + L K_UU) 一次并缓存 (I/mu + L K_UU)^{-1} L, 代价 O((n+m)^3)"""
    anchors = as_points(anchors, "anchors")
    L = np.asarray(L, dtype=float)
    n_anchor = anchors.shape[0]
    if L.shape != (n_anchor, n_anchor):
        raise InvalidArgumentError(f"L 的形状 {L.shape} 与锚点数 {n_anchor} 不一致")
    if mu is None or not np.isfinite(mu) or mu < 0.0:
        raise InvalidArgumentError(f"mu 必须为非负数, 实际 {mu}")
    if np.max(np.abs(L - L.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(L), initial=0.0)):
        raise InvalidArgumentError("L 必须对称")

    K = gram(base, anchors).entries if base_gram is None else np.asarray(base_gram, dtype=float)
    if K.shape != (n_anchor, n_anchor):
        raise InvalidArgumentError(f"base_gram 的形状 {K.shape} 与锚点数 {n_anchor} 不一致")

    if mu == 0.0 or not np.any(L):
        zeros = np.zeros((n_anchor, n_anchor))
        zeros.setflags(write=False)
        return DeformedKernel(base=base, anchors=anchors, L=L, mu=float(mu), K_UU=K, deformation=zeros)

    LK = L @ K
    system = np.eye(n_anchor) / mu + LK
    fact = factorize(system, jitter_base=float(np.trace(LK)))
    if fact.warning:
        logger.warning(f"mu={mu:g}: {fact.warning}")
    deformation = fact.solve(L)
    if not np.all(np.isfinite(deformation)):
        raise FactorizationError(f"mu={mu:g} 时求解结果非有限", rcond=fact.rcond)
    deformation.setflags(write=False)
    return DeformedKernel(
        base=base,
        anchors=anchors,
        L=L,
        mu=float(mu),
        K_UU=K,
        deformation=deformation,
        solve_cache=fact,
    )


def _anchor_sections(dk: DeformedKernel, points) -> np.ndarray:
    """每行是 k_x^t, 形状 (len(points), n+m)"""
    points = as_points(points)
    if points.shape[1] != dk.anchors.shape[1]:
        raise InvalidArgumentError(f"维度不一致: {points.shape[1]} vs {dk.anchors.shape[1]}")
    return cross_kernel(dk.base, points, dk.anchors)


def deformed_cross(dk: DeformedKernel, xs, ys) -> np.ndarray:
    """矩阵形式 k~(xs_i, ys_j)"""
    xs = as_points(xs, "xs")
    ys = as_points(ys, "ys")
    base = cross_kernel(dk.base, xs, ys)
    if dk.is_trivial:
        return base
    kx = _anchor_sections(dk, xs)
    ky = _anchor_sections(dk, ys)
    return base - kx @ dk.deformation @ ky.T


def eval_deformed(dk: DeformedKernel, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != dk.anchors.shape[1] or y.shape[0] != dk.anchors.shape[1]:
        raise InvalidArgumentError(f"维度不一致: 锚点维度 {dk.anchors.shape[1]}, 输入 {x.shape[0]}/{y.shape[0]}")
    return float(deformed_cross(dk, x[None, :], y[None, :])[0, 0])


def deformed_gram(dk: DeformedKernel, points) -> GramMatrix:
    """变形核的 Gram 矩阵, 组装后做 (A + A^t)/2; 不对称量超过 1e-6 直接报错"""
    points = as_points(points)
    A = deformed_cross(dk, points, points)
    scale = max(1.0, float(np.max(np.abs(A))))
    asymmetry = float(np.max(np.abs(A - A.T))) / scale
    if asymmetry > ASYMMETRY_LIMIT:
        raise FactorizationError(f"变形 Gram 矩阵不对称量 {asymmetry:.3e} 超过 {ASYMMETRY_LIMIT:g}", rcond=dk.rcond)
    A = 0.5 * (A + A.T)
    A.setflags(write=False)
    return GramMatrix(entries=A, spec=dk, asymmetry=asymmetry)


def deformation_diag(dk: DeformedKernel, points) -> np.ndarray:
    """逐点变形项 k_{x_i}^t (I/mu + LK)^{-1} L k_{x_i}"""
    points = as_points(points)
    if dk.is_trivial:
        return np.zeros(points.shape[0])
    kx = _anchor_sections(dk, points)
    return np.einsum("ij,ij->i", kx @ dk.deformation, kx)


def deformed_diag(dk: DeformedKernel, points) -> np.ndarray:
    """k~(x_i, x_i) = k(x_i, x_i) - 变形项, 截断到 [0, k(x_i, x_i)]

    超出 [-1e-10, k + 1e-10] 说明 (I/mu + LK)^{-1} L 数值上已不是半正定, 记 warning。
    """
    points = as_points(points)
    base = kernel_diag(dk.base, points)
    values = base - deformation_diag(dk, points)
    slack = DIAG_SLACK * np.maximum(1.0, np.abs(base))
    outside = (values < -slack) | (values > base + slack)
    if np.any(outside):
        logger.warning(
            f"mu={dk.mu:g}: {int(outside.sum())} 个对角元超出 [0, k(x,x)] (容差 {DIAG_SLACK:g}), "
            f"min={values.min():.3e}; 已截断"
        )
    return np.clip(values, 0.0, np.maximum(base, 0.0))


def separation_ratio(dk: DeformedKernel, ref, same_points, other_points) -> float:
    """k~(ref, .) 在另一类点上的均值 / 在同类点上的均值"""
    same = deformed_cross(dk, ref, same_points).mean()
    other = deformed_cross(dk, ref, other_points).mean()
    if same <= 0.0:
        raise InvalidArgumentError("同类点上的核均值不为正, 比值无意义")
    return float(other / same)


def slice_grid(dk: DeformedKernel, ref, grid_size: int = 100, margin: float = 0.1, box_points=None):
    """k~(ref, .) 在 g x g 均匀网格上的取值, 网格覆盖 box_points (默认锚点) 的外接矩形, 四周各留 margin 比例

    返回 (grid, values), grid 形状 (g*g, 2), 按行优先 (gy 外层, gx 内层)。
    """
    if int(grid_size) < 2:
        raise InvalidArgumentError(f"网格大小至少为 2, 实际 {grid_size}")
    if margin < 0.0:
        raise InvalidArgumentError(f"margin 不能为负, 实际 {margin}")
    box = dk.anchors if box_points is None else as_points(box_points, "box_points")
    if box.shape[1] != 2:
        raise InvalidArgumentError(f"切片只支持二维数据, 实际 d={box.shape[1]}")
    lo, hi = box.min(axis=0), box.max(axis=0)
    pad = margin * (hi - lo)
    gx = np.linspace(lo[0] - pad[0], hi[0] + pad[0], int(grid_size))
    gy = np.linspace(lo[1] - pad[1], hi[1] + pad[1], int(grid_size))
    mesh_x, mesh_y = np.meshgrid(gx, gy)
    grid = np.column_stack([mesh_x.ravel(), mesh_y.ravel()])
    return grid, deformed_cross(dk, ref, grid)[0]
