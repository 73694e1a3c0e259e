# -*- coding: utf-8 -*-
"""
linalg_utils.py

稠密线性系统的分解与求解: LU (部分主元) + LAPACK gecon 条件数估计,
条件数过差时在对角线上加一次 jitter 后重试。
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as la
from scipy.linalg import lapack

from errors import FactorizationError
from settings import get_settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Factorization:
    """LU 分解句柄; 只读使用, 可以在线程之间共享"""

    lu: np.ndarray
    piv: np.ndarray
    rcond: float
    jitter: float = 0.0
    warning: Optional[str] = None

    @property
    def size(self) -> int:
        return self.lu.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        return la.lu_solve((self.lu, self.piv), b, check_finite=False)


def rcond_estimate(lu: np.ndarray, anorm: float) -> float:
    """由 LU 因子估计 1-范数倒数条件数"""
    if anorm == 0.0:
        return 0.0
    gecon, = lapack.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0:
        return 0.0
    return float(rcond)


def _lu_with_rcond(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    anorm = float(np.linalg.norm(a, 1))
    try:
        lu, piv = la.lu_factor(a, check_finite=True)
    except (ValueError, la.LinAlgError) as e:
        raise FactorizationError(f"LU 分解失败: {e}", rcond=0.0) from e
    # 精确奇异时 lu_factor 只给 warning, 由 rcond 兜住
    if not np.all(np.isfinite(lu)) or np.any(np.diag(lu) == 0.0):
        return lu, piv, 0.0
    return lu, piv, rcond_estimate(lu, anorm)


def factorize(
    a: np.ndarray,
    *,
    jitter_base: Optional[float] = None,
    rcond_floor: Optional[float] = None,
    jitter_scale: Optional[float] = None,
) -> Factorization:
    """LU 分解; rcond 低于阈值时对角线加 jitter_scale * jitter_base / N 后重试一次

    jitter_base 默认取 |trace(a)|, 调用方可以传入更合适的尺度 (例如 trace(LK))。
    """
    settings = get_settings()
    rcond_floor = settings.rcond_floor if rcond_floor is None else rcond_floor
    jitter_scale = settings.jitter_scale if jitter_scale is None else jitter_scale

    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise FactorizationError(f"需要方阵, 实际形状 {a.shape}")

    lu, piv, rcond = _lu_with_rcond(a)
    if rcond >= rcond_floor:
        return Factorization(lu=lu, piv=piv, rcond=rcond)

    n = a.shape[0]
    base = abs(float(np.trace(a))) if jitter_base is None else abs(float(jitter_base))
    jitter = jitter_scale * (base if base > 0.0 else 1.0) / n
    logger.warning(f"系统接近奇异 (rcond={rcond:.3e}), 对角线加 jitter={jitter:.3e} 后重试")
    lu, piv, rcond_retry = _lu_with_rcond(a + jitter * np.eye(n))
    if rcond_retry < rcond_floor:
        raise FactorizationError("加 jitter 后系统仍然数值奇异", rcond=rcond_retry)
    return Factorization(
        lu=lu,
        piv=piv,
        rcond=rcond_retry,
        jitter=jitter,
        warning=f"jitter {jitter:.3e} added (rcond before {rcond:.3e})",
    )


def jittered_solve(a: np.ndarray, b: np.ndarray, *, assume_a: str = "gen") -> np.ndarray:
    """求解 a x = b; 对称正定系统先走 Cholesky, 失败再走带 jitter 的 LU"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if assume_a == "pos":
        try:
            c, lower = la.cho_factor(a, lower=True, check_finite=True)
            return la.cho_solve((c, lower), b, check_finite=False)
        except la.LinAlgError:
            logger.debug("Cholesky 失败, 改用 LU")
    return factorize(a).solve(b)
