# -*- coding: utf-8 -*-
"""
sample_bounds.py

半监督 ERM 的样本量计算器 (有标签 n / 无标签 m), 结果取整数上取整。

    thm2 (一般损失):  m >= 8 B1^2/eps^2 [ln 16/delta + 2 pdim_psi ln 4B1/eps + 1]
    thm2 (一般损失):  n >= max(8 B2^2/eps^2 [ln 8/delta + 2 pdim_phi ln 4B2/eps + 1], h/4)
    thm3 (平方损失):  m >= 2 B1^2/eps^2 [ln 8/delta + 2 pdim_psi ln 2B1/eps + 2]
    thm3 (平方损失):  n >= C * B2^2/eps * (pdim_phi ln(sqrt(B2)/eps) + ln 2/delta)   (C 由调用方给定)

伪维数 (pdim) 只是输入参数, 这里从不估计。界是对所有分布的最坏情况陈述,
不用经验学习曲线去验证。
"""
import logging
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import BoundDomainError, InvalidArgumentError

logger = logging.getLogger(__name__)

# 对数参数低于 e 时 (对数项 < 1) 结果处在接近无意义的区域, 输出里打标记
VACUOUS_LOG_ARGUMENT = math.e
VACUOUS_FLAG = "vacuous-regime"


class BoundQuery(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(gt=0.0, lt=1.0)
    delta: float = Field(gt=0.0, lt=1.0)
    B1: float = Field(default=1.0, gt=0.0)
    B2: float = Field(default=1.0, gt=0.0)
    pdim_psi: int = Field(default=1, ge=1)
    pdim_phi: int = Field(default=1, ge=1)
    h: Optional[int] = Field(default=None, ge=1)
    tau: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="before")
    @classmethod
    def _default_h(cls, data):
        # h 与 pdim_phi 是同一个量; 未给出时取 pdim_phi
        if isinstance(data, dict) and data.get("h") is None:
            data = {**data, "h": data.get("pdim_phi", 1)}
        return data


class BoundResult(BaseModel):
    m: int = Field(ge=1)
    n: int = Field(ge=1)
    theorem: Literal["thm2", "thm3"]
    pairs_adjusted: bool = False
    m_pairs: Optional[int] = None
    big_o_constant: Optional[float] = None
    flags: List[str] = Field(default_factory=list)


def _check_log_argument(value: float, precondition: str) -> None:
    if value <= 1.0:
        raise BoundDomainError("界在该 epsilon 下无意义", precondition=precondition)


def _ceil(value: float) -> int:
    return max(1, int(math.ceil(value)))


# --- 实数值公式 (不做 BoundQuery 校验, 测试与边界分析直接调用) ---
def thm2_unlabeled_expression(epsilon: float, delta: float, B1: float, pdim_psi: int) -> float:
    return 8.0 * B1 ** 2 / epsilon ** 2 * (
        math.log(16.0 / delta) + 2.0 * pdim_psi * math.log(4.0 * B1 / epsilon) + 1.0
    )


def thm2_labeled_expression(epsilon: float, delta: float, B2: float, pdim_phi: int, h: int) -> float:
    first = 8.0 * B2 ** 2 / epsilon ** 2 * (
        math.log(8.0 / delta) + 2.0 * pdim_phi * math.log(4.0 * B2 / epsilon) + 1.0
    )
    return max(first, h / 4.0)


def thm3_unlabeled_expression(epsilon: float, delta: float, B1: float, pdim_psi: int) -> float:
    return 2.0 * B1 ** 2 / epsilon ** 2 * (
        math.log(8.0 / delta) + 2.0 * pdim_psi * math.log(2.0 * B1 / epsilon) + 2.0
    )


def thm3_labeled_expression(epsilon: float, delta: float, B2: float, pdim_phi: int, big_o_constant: float) -> float:
    return big_o_constant * B2 ** 2 / epsilon * (
        pdim_phi * math.log(math.sqrt(B2) / epsilon) + math.log(2.0 / delta)
    )


# --- 整数样本量 ---
def unlabeled_size_thm2(q: BoundQuery) -> int:
    _check_log_argument(4.0 * q.B1 / q.epsilon, "4*B1/epsilon > 1")
    return _ceil(thm2_unlabeled_expression(q.epsilon, q.delta, q.B1, q.pdim_psi))


def labeled_size_thm2(q: BoundQuery) -> int:
    _check_log_argument(4.0 * q.B2 / q.epsilon, "4*B2/epsilon > 1")
    return _ceil(thm2_labeled_expression(q.epsilon, q.delta, q.B2, q.pdim_phi, q.h))


def unlabeled_size_thm3(q: BoundQuery) -> int:
    _check_log_argument(2.0 * q.B1 / q.epsilon, "2*B1/epsilon > 1")
    return _ceil(thm3_unlabeled_expression(q.epsilon, q.delta, q.B1, q.pdim_psi))


def labeled_size_thm3(q: BoundQuery, big_o_constant: float) -> int:
    """O(.) 里隐藏的常数必须由调用方给出, 没有正确的默认值"""
    if big_o_constant is None or not math.isfinite(big_o_constant) or big_o_constant <= 0.0:
        raise InvalidArgumentError(f"big_o_constant 必须为正数, 实际 {big_o_constant}")
    _check_log_argument(math.sqrt(q.B2) / q.epsilon, "sqrt(B2)/epsilon > 1")
    return _ceil(thm3_labeled_expression(q.epsilon, q.delta, q.B2, q.pdim_phi, big_o_constant))


def pairs_to_points(m_pairs: int) -> int:
    """m 个点给出 m^2 - 1 个点对: 返回满足 p^2 - 1 >= m_pairs 的最小整数 p"""
    if int(m_pairs) < 1:
        raise InvalidArgumentError(f"m_pairs 必须为正整数, 实际 {m_pairs}")
    target = int(m_pairs) + 1
    p = math.isqrt(target)
    if p * p < target:
        p += 1
    return p


def vacuous_flags(q: BoundQuery, theorem: str) -> List[str]:
    if theorem == "thm2":
        arguments = [4.0 * q.B1 / q.epsilon, 4.0 * q.B2 / q.epsilon]
    else:
        arguments = [2.0 * q.B1 / q.epsilon, math.sqrt(q.B2) / q.epsilon]
    return [VACUOUS_FLAG] if min(arguments) < VACUOUS_LOG_ARGUMENT else []


def compute_bounds(
    q: BoundQuery,
    theorem: str = "thm2",
    big_o_constant: Optional[float] = None,
    pairs_mode: bool = False,
) -> BoundResult:
    """按定理计算 (m, n); pairs_mode 时把点对数量换算成点数 (只需要 sqrt(m) 量级)"""
    if theorem == "thm2":
        m, n = unlabeled_size_thm2(q), labeled_size_thm2(q)
    elif theorem == "thm3":
        if big_o_constant is None:
            raise InvalidArgumentError("定理 3 的有标签样本量需要显式给出 big_o_constant")
        m, n = unlabeled_size_thm3(q), labeled_size_thm3(q, big_o_constant)
    else:
        raise InvalidArgumentError(f"未知的定理: {theorem}")

    flags = vacuous_flags(q, theorem)
    m_pairs = None
    if pairs_mode:
        m_pairs = m
        m = pairs_to_points(m)
        flags.append("pairs-mode")
    logger.info(f"{theorem}: m={m}, n={n}, flags={flags}")
    return BoundResult(
        m=m,
        n=n,
        theorem=theorem,
        pairs_adjusted=pairs_mode,
        m_pairs=m_pairs,
        big_o_constant=big_o_constant if theorem == "thm3" else None,
        flags=flags,
    )
