# -*- coding: utf-8 -*-
"""
manifold_forge_cli.py

命令行入口: 生成数据、扫描复杂度曲线、elbow 选择、训练/评估、核切片导出、样本量计算。

    python manifold_forge_cli.py gen --n-per-circle 250 --labels 2 --seed 1 -o circles.csv
    python manifold_forge_cli.py curve --data circles.csv -o curve.csv
    python manifold_forge_cli.py select --curve curve.csv
    python manifold_forge_cli.py train --data circles.csv --method deformed --mu 0.2 -o model.json
    python manifold_forge_cli.py eval --model model.json --data test.csv
    python manifold_forge_cli.py slice --data circles.csv --mu 0.2 --ref-index 0 -o slice.csv
    python manifold_forge_cli.py bounds --epsilon 0.1 --delta 0.05 --pdim-psi 10 --pdim-phi 10

成功时退出码为 0; 出错时在 stderr 写一行 JSON 错误信息并返回非零退出码。
"""
import argparse
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from base_kernels import KernelSpec
from circles_data import DEFAULT_NOISE_SD, Dataset, gen_circles, load_csv, save_csv, split_labels
from deformed_kernel import build_deformed, separation_ratio, slice_grid
from errors import InvalidArgumentError, ManifoldForgeError
from graph_laplacian import build_graph
from logging_setup import setup_logging
from manifold_learner import (
    DEFAULT_LAMBDA_A,
    load_model,
    mse,
    save_model,
    solve_constrained,
    train_semi_deformed,
    train_semi_joint,
    train_supervised,
    zero_one_error,
)
from rademacher_complexity import complexity_curve, elbow_select, load_curve_csv, log_mu_grid, save_curve_csv
from sample_bounds import BoundQuery, compute_bounds
from settings import get_settings

logger = logging.getLogger(__name__)

IO_EXIT_CODE = 7
INTERNAL_EXIT_CODE = 1
INPUT_OPTIONS = ("data", "model", "curve", "mu_from_curve", "truth")


class RunConfig(BaseModel):
    """一次运行的完整配置; 计算开始前校验所有路径"""

    model_config = ConfigDict(frozen=True)

    command: str
    seed: int
    output: Optional[str] = None
    quiet: bool = False
    options: Dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_paths(self):
        for key in INPUT_OPTIONS:
            value = self.options.get(key)
            if value is not None and not Path(value).is_file():
                raise ValueError(f"输入文件不存在: --{key.replace('_', '-')} {value}")
        if self.output is not None:
            parent = Path(self.output).resolve().parent
            if not parent.is_dir():
                raise ValueError(f"输出目录不存在: {parent}")
        return self

    def header(self) -> Dict[str, Any]:
        return self.model_dump()


# --- 输出 ---
def _write_text(config: RunConfig, text: str) -> None:
    if config.output is None:
        sys.stdout.write(text)
        return
    try:
        Path(config.output).write_text(text, encoding="utf-8")
    except OSError as e:
        raise OSError(f"写入输出失败 ({config.output}): {e}") from e
    logger.info(f"结果已写入: {config.output}")


def _write_json(config: RunConfig, payload: Dict[str, Any]) -> None:
    payload = {**payload, "config": config.header()}
    _write_text(config, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")


def _write_frame(config: RunConfig, frame: pd.DataFrame, extra_header: Optional[List[str]] = None) -> None:
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(config.header(), ensure_ascii=False)}\n")
    for line in extra_header or []:
        buf.write(f"# {line}\n")
    frame.to_csv(buf, index=False, float_format="%.17g", lineterminator="\n")
    _write_text(config, buf.getvalue())


def _kernel(args) -> KernelSpec:
    return KernelSpec(kind=args.kernel, sigma=args.sigma if args.kernel == "gaussian" else None)


def _parse_grid(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()], dtype=float)
    except ValueError:
        raise InvalidArgumentError(f"无法解析 mu 网格: {text!r}") from None


# --- 子命令 ---
def cmd_gen(args, config: RunConfig) -> None:
    ds = gen_circles(args.n_per_circle, tuple(args.radii), args.noise_sd, config.seed)
    if args.labels is not None:
        ds = split_labels(ds, args.labels, config.seed)
    logger.info(f"运行配置: {config.header()}")
    save_csv(ds, sys.stdout if config.output is None else config.output)


def _curve_for(args, ds: Dataset):
    grid = _parse_grid(args.mu_grid) if args.mu_grid else log_mu_grid(args.mu_min, args.mu_max, args.mu_num)
    gl = build_graph(ds.points, args.sigma_w)
    labeled = np.arange(ds.n) if ds.n >= 1 else np.arange(ds.n_total)
    if ds.n == 0:
        logger.info("数据集没有标签, 复杂度按全部点计算")
    return complexity_curve(
        args.r,
        _kernel(args),
        ds.points,
        gl.L,
        labeled,
        grid,
        max_workers=args.workers,
        progress=not args.quiet,
    )


def cmd_curve(args, config: RunConfig) -> None:
    ds = load_csv(args.data)
    curve = _curve_for(args, ds)
    extra = [f"base_upper: {curve.base_upper:.17g}"]
    if curve.selected_mu is not None:
        extra.append(f"selected_mu: {curve.selected_mu:.17g}")
    if config.output is None:
        _write_frame(config, curve.to_frame(), extra)
    else:
        save_curve_csv(curve, config.output, [f"config: {json.dumps(config.header(), ensure_ascii=False)}"] + extra)


def cmd_select(args, config: RunConfig) -> None:
    curve = load_curve_csv(args.curve)
    index = elbow_select(curve)
    _write_json(config, {
        "index": index,
        "mu": float(curve.mu_grid[index]),
        "upper": float(curve.upper_values[index]),
        "lower": float(curve.lower_values[index]),
    })


def _resolve_mu(args) -> float:
    if args.mu_from_curve:
        curve = load_curve_csv(args.mu_from_curve)
        index = curve.elbow_index if curve.elbow_index is not None else elbow_select(curve)
        mu = float(curve.mu_grid[index])
        logger.info(f"使用曲线 elbow 选出的 mu={mu:g}")
        return mu
    return args.mu


def cmd_train(args, config: RunConfig) -> None:
    if config.output is None:
        raise InvalidArgumentError("train 需要 --output 指定模型文件")
    ds = load_csv(args.data)
    base = _kernel(args)
    if args.method == "supervised":
        model = train_supervised(ds, base, args.lambda_a)
    else:
        gl = build_graph(ds.points, args.sigma_w)
        if args.tau is not None:
            model, mu = solve_constrained(ds, base, gl, args.lambda_a, args.tau)
            if args.method == "deformed":
                model = train_semi_deformed(ds, base, gl, args.lambda_a, mu)
        else:
            mu = _resolve_mu(args)
            trainer = train_semi_joint if args.method == "joint" else train_semi_deformed
            model = trainer(ds, base, gl, args.lambda_a, mu)
    save_model(model, config.output)
    logger.info(
        f"训练完成: method={model.method}, mu={model.mu:g}, lambda_a={model.lambda_a:g}, "
        f"lambda_eq2={model.lambda_eq2:g}, 训练误差={zero_one_error(model, ds):.4f}"
    )


def cmd_eval(args, config: RunConfig) -> None:
    ds = load_csv(args.data)
    if ds.n == 0:
        raise InvalidArgumentError(f"评估文件没有标签: {args.data}")
    model = load_model(args.model)
    error = zero_one_error(model, ds)
    _write_json(config, {
        "method": model.method,
        "n": ds.n,
        "zero_one_error": error,
        "accuracy": 1.0 - error,
        "mse": mse(model, ds),
        "mu": model.mu,
        "lambda_a": model.lambda_a,
    })


def cmd_slice(args, config: RunConfig) -> None:
    if args.grid_size < 2:
        raise InvalidArgumentError(f"网格大小至少为 2, 实际 {args.grid_size}")
    ds = load_csv(args.data)
    if ds.dim != 2:
        raise InvalidArgumentError(f"slice 只支持二维数据, 实际 d={ds.dim}")
    if not 0 <= args.ref_index < ds.n_total:
        raise InvalidArgumentError(f"--ref-index 超出范围 [0, {ds.n_total})")
    gl = build_graph(ds.points, args.sigma_w)
    dk = build_deformed(_kernel(args), ds.points, gl.L, args.mu)
    ref = ds.points[args.ref_index]
    grid, values = slice_grid(dk, ref, args.grid_size, args.margin)
    frame = pd.DataFrame({"gx": grid[:, 0], "gy": grid[:, 1], "value": values})

    extra = [f"ref: {ref.tolist()}"]
    groups = _class_groups(args, ds, ref)
    if groups is not None:
        same, other = groups
        try:
            ratio = separation_ratio(dk, ref, same, other)
        except InvalidArgumentError as e:
            logger.warning(f"跳过分离比: {e}")
        else:
            extra.append(f"separation_ratio: {ratio:.17g}")
            logger.info(f"mu={args.mu:g} 时分离比 (异类均值/同类均值) = {ratio:.4f}")
    _write_frame(config, frame, extra)


def _class_groups(args, ds: Dataset, ref: np.ndarray):
    """分离比用的 (同类点, 异类点)

    给了 --truth (gen 不带 --labels 的完整标注输出) 时按真实类别分组;
    否则只能用 ds 里的有标签点。
    """
    if args.truth is not None:
        truth = load_csv(args.truth)
        if truth.n != truth.n_total:
            raise InvalidArgumentError(f"--truth 必须是完整标注的数据集: {args.truth}")
        match = np.flatnonzero(np.all(truth.points == ref, axis=1))
        if match.size == 0:
            raise InvalidArgumentError("参考点不在 --truth 数据集里")
        own = truth.labels[match[0]]
        return truth.points[truth.labels == own], truth.points[truth.labels != own]
    if args.ref_index < ds.n and len(np.unique(ds.labels)) == 2:
        logger.warning("未给 --truth, 分离比只在有标签点上计算")
        own = ds.labels[args.ref_index]
        return ds.labeled_points[ds.labels == own], ds.labeled_points[ds.labels != own]
    return None


def cmd_bounds(args, config: RunConfig) -> None:
    query = BoundQuery(
        epsilon=args.epsilon,
        delta=args.delta,
        B1=args.b1,
        B2=args.b2,
        pdim_psi=args.pdim_psi,
        pdim_phi=args.pdim_phi,
        h=args.h,
        tau=args.tau,
    )
    theorems = {"2": ["thm2"], "3": ["thm3"], "both": ["thm2", "thm3"]}[args.theorem]
    results = [compute_bounds(query, t, args.big_o_constant, args.pairs_mode) for t in theorems]
    if len(results) == 1:
        payload = results[0].model_dump()
    else:
        payload = {"results": [r.model_dump() for r in results]}
    _write_json(config, payload)


COMMANDS = {
    "gen": cmd_gen,
    "curve": cmd_curve,
    "select": cmd_select,
    "train": cmd_train,
    "eval": cmd_eval,
    "slice": cmd_slice,
    "bounds": cmd_bounds,
}


class JsonArgumentParser(argparse.ArgumentParser):
    """用法错误改为抛 InvalidArgumentError, 由 main 统一写 JSON 错误行 (退出码 2)"""

    def error(self, message: str):
        raise InvalidArgumentError(f"{self.prog}: {message}")


def _add_kernel_args(p: argparse.ArgumentParser, with_graph: bool = True) -> None:
    p.add_argument("--kernel", choices=["gaussian", "linear"], default="gaussian", help="基础核 (默认: %(default)s)")
    p.add_argument("--sigma", type=float, default=0.5, help="高斯核 exp(-d^2/sigma) 的 sigma (默认: %(default)s)")
    if with_graph:
        p.add_argument("--sigma-w", type=float, default=0.2, help="图权重的 sigma_w (默认: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    common = JsonArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=settings.default_seed, help="随机种子 (默认: %(default)s)")
    common.add_argument("-o", "--output", default=None, help="输出文件 (默认写到 stdout)")
    common.add_argument("--quiet", action="store_true", help="只输出 WARNING 及以上日志, 关闭进度条")
    common.add_argument("--log-file", default=None, help="额外写入的日志文件")

    parser = JsonArgumentParser(
        prog="manifold_forge_cli",
        description="流形正则化 / 变形核 / Rademacher 复杂度 工具箱",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="生成同心圆数据集")
    p.add_argument("--n-per-circle", type=int, default=250)
    p.add_argument("--radii", type=float, nargs=2, default=[1.0, 2.0], metavar=("R1", "R2"))
    p.add_argument("--noise-sd", type=float, default=DEFAULT_NOISE_SD)
    p.add_argument("--labels", type=int, default=None, help="保留的标签数 (默认全部保留)")

    p = sub.add_parser("curve", parents=[common], help="mu 扫描的 Rademacher 复杂度曲线")
    p.add_argument("--data", required=True)
    _add_kernel_args(p)
    p.add_argument("--r", type=float, default=1.0, help="RKHS 球半径")
    p.add_argument("--mu-min", type=float, default=1e-3)
    p.add_argument("--mu-max", type=float, default=1.0)
    p.add_argument("--mu-num", type=int, default=25)
    p.add_argument("--mu-grid", default=None, help="显式的 mu 列表, 逗号分隔, 必须递增")
    p.add_argument("--workers", type=int, default=settings.max_workers)

    p = sub.add_parser("select", parents=[common], help="在曲线上做 elbow 选择")
    p.add_argument("--curve", required=True)

    p = sub.add_parser("train", parents=[common], help="训练监督/半监督模型")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=["supervised", "joint", "deformed"], default="deformed")
    _add_kernel_args(p)
    p.add_argument("--lambda-a", type=float, default=DEFAULT_LAMBDA_A)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--mu-from-curve", default=None, help="使用曲线文件里 elbow 选出的 mu")
    p.add_argument("--tau", type=float, default=None, help="改为求解 R_hat(f) <= tau 的约束问题")

    p = sub.add_parser("eval", parents=[common], help="在有标签数据上评估模型")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("slice", parents=[common], help="导出 k~(x_ref, .) 的网格切片")
    p.add_argument("--data", required=True)
    _add_kernel_args(p)
    p.add_argument("--mu", type=float, default=0.2)
    p.add_argument("--ref-index", type=int, default=0)
    p.add_argument("--grid-size", type=int, default=100)
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--truth", default=None, help="完整标注的数据集 (gen 不带 --labels), 用来按整圈计算分离比")

    p = sub.add_parser("bounds", parents=[common], help="样本量计算器")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--b1", type=float, default=1.0)
    p.add_argument("--b2", type=float, default=1.0)
    p.add_argument("--pdim-psi", type=int, default=1)
    p.add_argument("--pdim-phi", type=int, default=1)
    p.add_argument("--h", type=int, default=None, help="默认等于 --pdim-phi")
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--theorem", choices=["2", "3", "both"], default="2")
    p.add_argument("--big-o-constant", type=float, default=None, help="定理 3 的 O(.) 常数, 必须显式给出")
    p.add_argument("--pairs-mode", action="store_true", help="把无标签点对数量换算成点数")
    return parser


def _fail(error: Exception, code: int, extra: Optional[Dict[str, Any]] = None) -> int:
    payload = {"error": type(error).__name__, "message": str(error), **(extra or {})}
    sys.stderr.write(json.dumps(payload, ensure_ascii=False) + "\n")
    return code


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except InvalidArgumentError as e:
        return _fail(e, e.exit_code)
    except ValidationError as e:
        # MF_* 环境变量不合法
        return _fail(e, InvalidArgumentError.exit_code)
    settings = get_settings()
    setup_logging(settings.log_level, quiet=args.quiet, log_file=args.log_file)

    options = {k: v for k, v in vars(args).items() if k not in {"command", "seed", "output", "quiet", "log_file"}}
    try:
        config = RunConfig(command=args.command, seed=args.seed, output=args.output, quiet=args.quiet, options=options)
        COMMANDS[args.command](args, config)
    except ValidationError as e:
        return _fail(e, InvalidArgumentError.exit_code)
    except ManifoldForgeError as e:
        logger.debug("命令执行失败", exc_info=True)
        return _fail(e, e.exit_code, e.details())
    except OSError as e:
        return _fail(e, IO_EXIT_CODE)
    except Exception as e:
        logger.exception("未预期的错误")
        return _fail(e, INTERNAL_EXIT_CODE)
    return 0


if __name__ == "__main__":
    sys.exit(main())
