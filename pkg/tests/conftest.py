# -*- coding: utf-8 -*-
import logging
import os
import sys

import numpy as np
import pytest

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from base_kernels import KernelSpec  # noqa: E402
from circles_data import gen_circles, split_labels  # noqa: E402
from graph_laplacian import build_graph  # noqa: E402
from settings import get_settings, reload_settings  # noqa: E402


@pytest.fixture(autouse=True)
def _isolate_logging():
    """CLI 每次调用都会重装 handler; 测试结束后还原根 logger"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for h in list(root.handlers):
        if h not in handlers:
            root.removeHandler(h)
            h.close()
    root.setLevel(level)


@pytest.fixture
def clean_settings(monkeypatch):
    for key in ("MF_LOG_LEVEL", "MF_MAX_WORKERS", "MF_RCOND_FLOOR", "MF_JITTER_SCALE", "MF_DEFAULT_SEED"):
        monkeypatch.delenv(key, raising=False)
    yield reload_settings()
    # monkeypatch 在本 fixture 之后才还原环境变量, 这里只清缓存, 下次读取时再解析
    get_settings.cache_clear()


@pytest.fixture
def base_kernel():
    return KernelSpec(kind="gaussian", sigma=0.5)


@pytest.fixture
def small_circles():
    """每圈 20 个点, 保留 4 个标签"""
    return split_labels(gen_circles(20, seed=3), 4, seed=3)


@pytest.fixture
def small_graph(small_circles):
    return build_graph(small_circles.points, 0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
