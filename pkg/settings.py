# -*- coding: utf-8 -*-
"""
settings.py

环境变量驱动的默认配置。启动时读取工作目录下可选的 .env 文件,
CLI 参数总是覆盖这里的值。

支持的环境变量:
    MF_LOG_LEVEL      日志级别 (默认 INFO)
    MF_MAX_WORKERS    mu 扫描的线程数 (默认 1)
    MF_RCOND_FLOOR    触发 jitter 重试的倒数条件数阈值 (默认 1e-14)
    MF_JITTER_SCALE   jitter 相对大小 (默认 1e-10)
    MF_DEFAULT_SEED   默认随机种子 (默认 0)
"""
import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

load_dotenv()


class ToolkitSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    log_level: str = "INFO"
    max_workers: int = Field(default=1, ge=1)
    rcond_floor: float = Field(default=1e-14, gt=0.0, lt=1.0)
    jitter_scale: float = Field(default=1e-10, gt=0.0)
    default_seed: int = Field(default=0, ge=0)

    @field_validator("log_level")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        value = value.upper()
        if value not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"未知的日志级别: {value}")
        return value


def _from_env() -> ToolkitSettings:
    return ToolkitSettings(
        log_level=os.getenv("MF_LOG_LEVEL", "INFO"),
        max_workers=int(os.getenv("MF_MAX_WORKERS", "1")),
        rcond_floor=float(os.getenv("MF_RCOND_FLOOR", "1e-14")),
        jitter_scale=float(os.getenv("MF_JITTER_SCALE", "1e-10")),
        default_seed=int(os.getenv("MF_DEFAULT_SEED", "0")),
    )


@lru_cache(maxsize=1)
def get_settings() -> ToolkitSettings:
    return _from_env()


def reload_settings() -> ToolkitSettings:
    """重新读取环境变量 (测试里配合 monkeypatch 使用)"""
    get_settings.cache_clear()
    return get_settings()
