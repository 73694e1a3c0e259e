# -*- coding: utf-8 -*-
"""
logging_setup.py

控制台彩色日志 (coloredlogs) + 可选的日志文件。日志统一写到 stderr,
结果文件和 JSON 输出不受影响。
"""
import logging
from typing import Optional

import coloredlogs

CONSOLE_FORMAT = (
    "%(levelname)s %(asctime)s - [t-%(threadName)s] "
    "(%(filename)s:%(lineno)d) %(funcName)s : %(message)s"
)
FILE_FORMAT = "%(asctime)s - %(levelname)s - [%(module)s:%(funcName)s:%(lineno)d] - %(message)s"


def setup_logging(level: str = "INFO", quiet: bool = False, log_file: Optional[str] = None) -> None:
    """配置根 logger; quiet 模式下控制台只输出 WARNING 及以上"""
    console_level = "WARNING" if quiet else level
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if log_file else console_level)
    coloredlogs.install(
        level=console_level,
        logger=root,
        datefmt="%Y-%m-%d %H:%M:%S",
        milliseconds=True,
        fmt=CONSOLE_FORMAT,
    )
    if log_file:
        fh = logging.FileHandler(log_file, mode="w", encoding="utf-8", errors="replace")
        fh.setLevel(level)
        fh.setFormatter(logging.Formatter(FILE_FORMAT))
        root.addHandler(fh)
