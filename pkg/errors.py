# -*- coding: utf-8 -*-
"""
errors.py

工具包统一的异常类型。每个类都继承最接近的内置异常,
调用方可以继续用 ``except ValueError`` 之类的写法。
"""
from typing import Any, Dict, Optional

import numpy as np


class ManifoldForgeError(Exception):
    """所有工具包异常的基类"""

    exit_code: int = 1

    def details(self) -> Dict[str, Any]:
        """附加到 CLI 错误 JSON 里的字段"""
        return {}


class InvalidArgumentError(ManifoldForgeError, ValueError):
    exit_code = 2


class DatasetParseError(ManifoldForgeError, ValueError):
    exit_code = 3

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        prefix = f"第 {row} 行: " if row is not None else ""
        super().__init__(f"{prefix}{message}")

    def details(self) -> Dict[str, Any]:
        return {"row": self.row}


class FactorizationError(ManifoldForgeError, np.linalg.LinAlgError):
    """线性系统奇异或数值上不可逆(jitter 重试之后)"""

    exit_code = 4

    def __init__(self, message: str, rcond: Optional[float] = None):
        self.rcond = rcond
        suffix = f" (rcond={rcond:.3e})" if rcond is not None else ""
        super().__init__(f"{message}{suffix}")

    def details(self) -> Dict[str, Any]:
        return {"rcond": self.rcond}


class BoundDomainError(ManifoldForgeError, ValueError):
    """样本量公式的对数参数 <= 1, 界在该 epsilon 下无意义"""

    exit_code = 5

    def __init__(self, message: str, precondition: str):
        self.precondition = precondition
        super().__init__(f"{message}: 违反前提 {precondition}")

    def details(self) -> Dict[str, Any]:
        return {"precondition": self.precondition}


class InfeasibleConstraintError(ManifoldForgeError, RuntimeError):
    exit_code = 6

    def __init__(self, message: str, achieved_penalty: float):
        self.achieved_penalty = achieved_penalty
        super().__init__(f"{message} (achieved penalty={achieved_penalty:.6e})")

    def details(self) -> Dict[str, Any]:
        return {"achieved_penalty": self.achieved_penalty}
