# -*- coding: utf-8 -*-
"""
rademacher_complexity.py

RKHS 球 H_r = {f : ||f|| <= r} 的经验 Rademacher 复杂度:

    r/(n sqrt 2) * sqrt(sum_i k(x_i, x_i)) <= Rad_n(H_r) <= r/n * sqrt(sum_i k(x_i, x_i))

流形正则化后的上界把 k 换成变形核 k~ 的对角线。求和只在 n 个有标签点上做,
变形用全部 n+m 个锚点。另外提供 Monte-Carlo 参考估计、mu 扫描曲线和 elbow 选择。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from base_kernels import GramMatrix, KernelSpec, as_points, gram
from deformed_kernel import build_deformed
from errors import DatasetParseError, FactorizationError, InvalidArgumentError
from settings import get_settings

logger = logging.getLogger(__name__)

SQRT2 = float(np.sqrt(2.0))
DIAG_TOLERANCE = 1e-10
CURVE_COLUMNS = ["mu", "upper", "lower", "selected"]


@dataclass(frozen=True)
class RadBound:
    lower: float
    upper: float
    r: float
    n: int


@dataclass
class ComplexityCurve:
    mu_grid: np.ndarray
    upper_values: np.ndarray
    lower_values: np.ndarray
    elbow_index: Optional[int] = None
    # 基础核 (mu = 0) 的上界, 用来算每个 mu 的复杂度下降量
    base_upper: Optional[float] = None
    errors: Dict[int, str] = field(default_factory=dict)

    @property
    def valid(self) -> np.ndarray:
        mask = np.isfinite(self.upper_values)
        for idx in self.errors:
            mask[idx] = False
        return mask

    @property
    def reduction(self) -> Optional[np.ndarray]:
        if self.base_upper is None:
            return None
        return self.base_upper - self.upper_values

    @property
    def selected_mu(self) -> Optional[float]:
        return None if self.elbow_index is None else float(self.mu_grid[self.elbow_index])

    def to_frame(self) -> pd.DataFrame:
        selected = np.zeros(len(self.mu_grid), dtype=int)
        if self.elbow_index is not None:
            selected[self.elbow_index] = 1
        valid = self.valid
        return pd.DataFrame({
            "mu": self.mu_grid,
            "upper": self.upper_values,
            "lower": self.lower_values,
            "selected": selected,
            "valid": valid.astype(int),
            "error": [self.errors.get(i, "") for i in range(len(self.mu_grid))],
        })


def rad_bounds_base(r: float, diag) -> RadBound:
    """upper = (r/n) sqrt(sum diag), lower = upper / sqrt 2"""
    if r is None or not np.isfinite(r) or r <= 0.0:
        raise InvalidArgumentError(f"半径 r 必须为正数, 实际 {r}")
    diag = np.asarray(diag, dtype=float).ravel()
    n = diag.shape[0]
    if n < 1:
        raise InvalidArgumentError("至少需要一个有标签点")
    if np.any(diag < -DIAG_TOLERANCE):
        raise InvalidArgumentError(f"核对角线出现负值: min={diag.min():.3e}")
    upper = r / n * float(np.sqrt(np.clip(diag, 0.0, None).sum()))
    return RadBound(lower=upper / SQRT2, upper=upper, r=float(r), n=n)


def rad_upper_mr(r: float, base_diag, deformation_diag) -> float:
    """(r/n) sqrt(sum_i max(0, k(x_i,x_i) - k_{x_i}^t (I/mu + LK)^{-1} L k_{x_i}))"""
    base_diag = np.asarray(base_diag, dtype=float).ravel()
    deformation_diag = np.asarray(deformation_diag, dtype=float).ravel()
    if base_diag.shape != deformation_diag.shape:
        raise InvalidArgumentError(f"长度不一致: {base_diag.shape[0]} vs {deformation_diag.shape[0]}")
    if r is None or not np.isfinite(r) or r <= 0.0:
        raise InvalidArgumentError(f"半径 r 必须为正数, 实际 {r}")
    n = base_diag.shape[0]
    if n < 1:
        raise InvalidArgumentError("至少需要一个有标签点")
    residual = base_diag - deformation_diag
    if np.any(residual < -DIAG_TOLERANCE):
        logger.warning(f"变形后对角线出现负值 (min={residual.min():.3e}), 截断为 0")
    return r / n * float(np.sqrt(np.clip(residual, 0.0, None).sum()))


def rad_lower_mr(r: float, base_diag, deformation_diag) -> float:
    return rad_upper_mr(r, base_diag, deformation_diag) / SQRT2


def _gram_entries(gram_on_labeled) -> np.ndarray:
    K = gram_on_labeled.entries if isinstance(gram_on_labeled, GramMatrix) else gram_on_labeled
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] < 1:
        raise InvalidArgumentError(f"Gram 矩阵必须是非空方阵, 实际形状 {K.shape}")
    return K


def rademacher_draws(r: float, gram_on_labeled, num_draws: int, seed: int = 0) -> np.ndarray:
    """每次抽样的 (r/n) sup_f sum_i sigma_i f(x_i) = (r/n) sqrt(sigma^t K sigma)"""
    if int(num_draws) < 1:
        raise InvalidArgumentError(f"num_draws 必须为正整数, 实际 {num_draws}")
    if r is None or not np.isfinite(r) or r <= 0.0:
        raise InvalidArgumentError(f"半径 r 必须为正数, 实际 {r}")
    K = _gram_entries(gram_on_labeled)
    n = K.shape[0]
    rng = np.random.default_rng(seed)
    sigma = rng.choice(np.array([-1.0, 1.0]), size=(int(num_draws), n))
    quad = np.einsum("di,ij,dj->d", sigma, K, sigma)
    return r / n * np.sqrt(np.clip(quad, 0.0, None))


def rad_empirical_mc(r: float, gram_on_labeled, num_draws: int, seed: int = 0) -> float:
    return float(rademacher_draws(r, gram_on_labeled, num_draws, seed).mean())


# --- mu 扫描 ---
def _check_grid(mu_grid) -> np.ndarray:
    grid = np.asarray(mu_grid, dtype=float).ravel()
    if grid.size < 1:
        raise InvalidArgumentError("mu 网格不能为空")
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0.0):
        raise InvalidArgumentError("mu 网格必须全部为正数")
    if np.any(np.diff(grid) <= 0.0):
        raise InvalidArgumentError("mu 网格必须严格递增")
    return grid


def log_mu_grid(mu_min: float = 1e-3, mu_max: float = 1.0, num: int = 25) -> np.ndarray:
    if mu_min <= 0.0 or mu_max <= mu_min or num < 1:
        raise InvalidArgumentError(f"非法的 mu 网格参数: [{mu_min}, {mu_max}] x {num}")
    return np.logspace(np.log10(mu_min), np.log10(mu_max), num)


def complexity_curve(
    r: float,
    base: KernelSpec,
    anchors,
    L,
    labeled_indices: Sequence[int],
    mu_grid,
    max_workers: Optional[int] = None,
    progress: bool = False,
) -> ComplexityCurve:
    """对每个 mu 计算流形正则化上界; 基础 Gram 只算一次, 每个 mu 分解一次"""
    grid = _check_grid(mu_grid)
    anchors = as_points(anchors, "anchors")
    labeled = np.asarray(labeled_indices, dtype=np.int64).ravel()
    if labeled.size < 1:
        raise InvalidArgumentError("至少需要一个有标签点")
    if labeled.min() < 0 or labeled.max() >= anchors.shape[0]:
        raise InvalidArgumentError("labeled_indices 超出锚点范围")

    K = gram(base, anchors).entries
    base_diag = np.diag(K)[labeled]
    sections = K[labeled]  # 行 i 是 k_{x_i}^t
    base_upper = rad_bounds_base(r, base_diag).upper

    def evaluate(mu: float) -> float:
        dk = build_deformed(base, anchors, L, mu, base_gram=K)
        def_diag = np.einsum("ij,ij->i", sections @ dk.deformation, sections)
        return rad_upper_mr(r, base_diag, def_diag)

    workers = max_workers or get_settings().max_workers
    upper = np.full(grid.size, np.nan)
    errors: Dict[int, str] = {}

    def guarded(idx: int) -> float:
        try:
            return evaluate(float(grid[idx]))
        except FactorizationError as e:
            errors[idx] = str(e)
            logger.warning(f"mu={grid[idx]:g} 分解失败, 该点不参与 elbow 选择: {e}")
            return np.nan

    indices = range(grid.size)
    bar = dict(total=grid.size, desc="mu sweep", disable=not progress, leave=False)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="mu-sweep") as pool:
            results = list(tqdm(pool.map(guarded, indices), **bar))
    else:
        results = [guarded(i) for i in tqdm(indices, **bar)]
    upper[:] = results

    curve = ComplexityCurve(
        mu_grid=grid,
        upper_values=upper,
        lower_values=upper / SQRT2,
        base_upper=base_upper,
        errors=errors,
    )
    if int(curve.valid.sum()) >= 3:
        curve.elbow_index = elbow_select(curve)
    logger.info(
        f"复杂度曲线完成: {grid.size} 个 mu, 失败 {len(errors)} 个, "
        f"elbow={'无' if curve.elbow_index is None else f'{curve.selected_mu:g}'}"
    )
    return curve


def elbow_select(curve: ComplexityCurve, tie_tol: float = 1e-12) -> int:
    """在 (log10 mu, value/value_0) 坐标下, 取到首尾连线垂直距离最大的点; 平局取较小的 mu"""
    valid_idx = np.flatnonzero(curve.valid)
    if valid_idx.size < 3:
        raise InvalidArgumentError(f"elbow 选择至少需要 3 个有效点, 实际 {valid_idx.size}")
    x = np.log10(curve.mu_grid[valid_idx])
    values = curve.upper_values[valid_idx]
    y = values / values[0] if values[0] != 0.0 else values
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    chord = float(np.hypot(dx, dy))
    distances = np.abs(dx * (y - y[0]) - dy * (x - x[0])) / chord
    interior = distances[1:-1]
    best = float(interior.max())
    pick = 1 + int(np.flatnonzero(interior >= best - tie_tol)[0])
    return int(valid_idx[pick])


# --- 曲线 CSV ---
def save_curve_csv(curve: ComplexityCurve, path: Union[str, Path], header_lines: Optional[List[str]] = None) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for line in header_lines or []:
            f.write(f"# {line}\n")
        curve.to_frame().to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    logger.info(f"复杂度曲线已保存: {path}")


def _numeric_column(frame: pd.DataFrame, column: str, kind, allow_missing: bool = False) -> np.ndarray:
    """逐行转换; 坏单元格报 DatasetParseError, 行号从表头 (第 1 行) 起算, 不计 # 行

    allow_missing 时空单元格读成 NaN (save_curve_csv 把失败点写成空串)。
    """
    values = []
    for i, cell in enumerate(frame[column].tolist()):
        if allow_missing and str(cell).strip() in ("", "nan", "NaN"):
            values.append(np.nan)
            continue
        try:
            values.append(kind(cell) if kind is float else int(str(cell).strip()))
        except (TypeError, ValueError):
            raise DatasetParseError(f"{column} 列不是数字: {cell!r}", row=i + 2) from None
    return np.array(values, dtype=kind)


def load_curve_csv(path: Union[str, Path]) -> ComplexityCurve:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"曲线文件不存在: {path}")
    try:
        frame = pd.read_csv(path, comment="#", keep_default_na=False, float_precision="round_trip")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DatasetParseError(f"无法解析曲线文件 {path}: {e}") from None
    missing = [c for c in CURVE_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidArgumentError(f"曲线文件缺少列: {missing}")
    mu = _numeric_column(frame, "mu", float)
    upper = _numeric_column(frame, "upper", float, allow_missing=True)
    errors = {}
    if "valid" in frame.columns:
        for i, flag in enumerate(_numeric_column(frame, "valid", int)):
            if flag == 0:
                errors[i] = str(frame["error"].iloc[i]) if "error" in frame.columns else "invalid"
    selected = np.flatnonzero(_numeric_column(frame, "selected", int) == 1)
    return ComplexityCurve(
        mu_grid=_check_grid(mu),
        upper_values=upper,
        lower_values=_numeric_column(frame, "lower", float, allow_missing=True),
        elbow_index=int(selected[0]) if selected.size else None,
        errors=errors,
    )
