# -*- coding: utf-8 -*-
"""
circles_data.py

合成数据集: 两个同心圆 (内圈 +1, 外圈 -1), 有标签/无标签划分, CSV 读写。

CSV 格式: 每行一个点, 先是 d 个坐标列, 最后一列是标签 (空字符串 = 无标签),
无表头, '.' 作小数点, 每行以换行结尾。有标签的点总是排在前面。
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from errors import DatasetParseError, InvalidArgumentError

logger = logging.getLogger(__name__)

DEFAULT_RADII: Tuple[float, float] = (1.0, 2.0)
DEFAULT_NOISE_SD = 0.05


@dataclass(frozen=True)
class Dataset:
    """点云 U = {x_1..x_{n+m}}; 前 n 个点有 ±1 标签, 后 m 个没有"""

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    # 每个点在来源数据集里的下标 (split_labels 会重排)
    origin_index: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise InvalidArgumentError(f"points 必须是非空的 (N, d) 矩阵, 实际形状 {points.shape}")
        labels = None
        if self.labels is not None and len(self.labels) > 0:
            labels = np.array(self.labels, dtype=float)
            if labels.ndim != 1 or labels.shape[0] > points.shape[0]:
                raise InvalidArgumentError("labels 必须是长度不超过点数的一维向量")
            if not np.all(np.isin(labels, (-1.0, 1.0))):
                raise InvalidArgumentError("标签只能是 -1 或 +1")
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
        origin = self.origin_index
        if origin is None:
            origin = np.arange(points.shape[0])
        origin = np.array(origin, dtype=np.int64)
        if origin.shape != (points.shape[0],):
            raise InvalidArgumentError("origin_index 长度必须等于点数")
        points.setflags(write=False)
        origin.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "origin_index", origin)

    @property
    def n(self) -> int:
        return 0 if self.labels is None else int(self.labels.shape[0])

    @property
    def m(self) -> int:
        return self.n_total - self.n

    @property
    def n_total(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def labeled_points(self) -> np.ndarray:
        return self.points[: self.n]

    @property
    def unlabeled_points(self) -> np.ndarray:
        return self.points[self.n:]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.points.shape != other.points.shape or self.n != other.n:
            return False
        if not np.array_equal(self.points, other.points):
            return False
        return self.n == 0 or np.array_equal(self.labels, other.labels)

    __hash__ = None


def gen_circles(
    n_per_circle: int,
    radii: Tuple[float, float] = DEFAULT_RADII,
    noise_sd: float = DEFAULT_NOISE_SD,
    seed: int = 0,
) -> Dataset:
    """两个同心圆, 每圈 n_per_circle 个点; 角度均匀, 半径加高斯噪声"""
    if int(n_per_circle) < 1:
        raise InvalidArgumentError(f"n_per_circle 必须为正整数, 实际 {n_per_circle}")
    r1, r2 = float(radii[0]), float(radii[1])
    if r1 <= 0.0 or r2 <= 0.0 or r1 == r2:
        raise InvalidArgumentError(f"半径必须为两个不同的正数, 实际 {radii}")
    if noise_sd < 0.0:
        raise InvalidArgumentError(f"noise_sd 不能为负, 实际 {noise_sd}")

    rng = np.random.default_rng(seed)
    blocks = []
    for radius in (r1, r2):
        angles = rng.uniform(0.0, 2.0 * np.pi, size=n_per_circle)
        rho = radius + noise_sd * rng.standard_normal(n_per_circle) if noise_sd > 0.0 else np.full(n_per_circle, radius)
        blocks.append(np.column_stack([rho * np.cos(angles), rho * np.sin(angles)]))
    points = np.vstack(blocks)
    labels = np.concatenate([np.ones(n_per_circle), -np.ones(n_per_circle)])
    logger.debug(f"生成同心圆数据: {points.shape[0]} 个点, radii={radii}, noise_sd={noise_sd}, seed={seed}")
    return Dataset(points=points, labels=labels)


def split_labels(ds: Dataset, n_keep: int, seed: int = 0) -> Dataset:
    """保留 n_keep 个标签 (无放回均匀抽取, n_keep >= 类别数时每类至少一个), 其余点留作无标签"""
    if ds.n != ds.n_total:
        raise InvalidArgumentError("split_labels 需要完全标注的数据集")
    if n_keep < 0 or n_keep > ds.n_total:
        raise InvalidArgumentError(f"n_keep 必须在 [0, {ds.n_total}] 之间, 实际 {n_keep}")

    rng = np.random.default_rng(seed)
    classes = np.unique(ds.labels)
    chosen = []
    if n_keep >= len(classes):
        for c in classes:
            members = np.flatnonzero(ds.labels == c)
            chosen.append(int(rng.choice(members)))
    rest = np.setdiff1d(np.arange(ds.n_total), chosen)
    extra = rng.choice(rest, size=n_keep - len(chosen), replace=False) if n_keep > len(chosen) else []
    keep = np.sort(np.concatenate([np.array(chosen, dtype=np.int64), np.asarray(extra, dtype=np.int64)]))
    hidden = np.setdiff1d(np.arange(ds.n_total), keep)
    order = np.concatenate([keep, hidden])

    return Dataset(
        points=ds.points[order],
        labels=ds.labels[keep],
        origin_index=ds.origin_index[order],
    )


# --- CSV 读写 ---
def save_csv(ds: Dataset, path: Union[str, Path, TextIO]) -> None:
    """path 可以是文件路径, 也可以是已打开的文本流 (例如 sys.stdout)"""
    target = path if hasattr(path, "write") else Path(path)
    frame = pd.DataFrame(ds.points, columns=[f"x{i}" for i in range(ds.dim)])
    label_col = np.full(ds.n_total, "", dtype=object)
    if ds.n:
        label_col[: ds.n] = [str(int(v)) for v in ds.labels]
    frame["label"] = label_col
    try:
        frame.to_csv(path, header=False, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as e:
        raise OSError(f"写入数据集失败 ({path}): {e}") from e
    logger.info(f"数据集已保存: {path} (n={ds.n}, m={ds.m}, d={ds.dim})")


def _parse_label(cell: str, row: int) -> Optional[int]:
    cell = cell.strip()
    if cell == "":
        return None
    try:
        value = float(cell)
    except ValueError:
        raise DatasetParseError(f"标签不是数字: {cell!r}", row=row) from None
    if value not in (-1.0, 1.0):
        raise DatasetParseError(f"标签必须是 -1, 1 或空, 实际 {cell!r}", row=row)
    return int(value)


def load_csv(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"数据集文件不存在: {path}")
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, na_filter=False,
                          skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise DatasetParseError("文件为空", row=1) from None
    except pd.errors.ParserError as e:
        # pandas 的信息形如 "Expected 3 fields in line 5, saw 4"
        row = None
        text = str(e)
        if " in line " in text:
            try:
                row = int(text.split(" in line ")[1].split(",")[0])
            except ValueError:
                row = None
        raise DatasetParseError(f"列数不一致: {text}", row=row) from None

    if raw.shape[1] < 2:
        raise DatasetParseError("至少需要一个坐标列和一个标签列", row=1)

    n_rows, n_cols = raw.shape
    points = np.empty((n_rows, n_cols - 1), dtype=float)
    labels = []
    seen_unlabeled = False
    for i, record in enumerate(raw.itertuples(index=False, name=None)):
        row = i + 1
        if any(not isinstance(cell, str) for cell in record):
            raise DatasetParseError(f"列数不一致, 期望 {n_cols} 列", row=row)
        for j, cell in enumerate(record[:-1]):
            try:
                points[i, j] = float(cell)
            except ValueError:
                raise DatasetParseError(f"第 {j + 1} 列不是数字: {cell!r}", row=row) from None
        label = _parse_label(record[-1], row)
        if label is None:
            seen_unlabeled = True
        elif seen_unlabeled:
            raise DatasetParseError("有标签的点必须排在无标签的点之前", row=row)
        else:
            labels.append(label)
    if not np.all(np.isfinite(points)):
        raise DatasetParseError("坐标包含 inf/nan")

    logger.info(f"读取数据集: {path} (n={len(labels)}, m={n_rows - len(labels)}, d={n_cols - 1})")
    return Dataset(points=points, labels=np.array(labels, dtype=float) if labels else None)
