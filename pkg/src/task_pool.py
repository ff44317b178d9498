#!/usr/bin/env python3
"""
任务池模块
按输入顺序收集结果的线程池映射，线程数受 WARPISO_THREADS 限制
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

THREADS_ENV = "WARPISO_THREADS"
MAX_DEFAULT_THREADS = 8

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(configured: Optional[int] = None) -> int:
    """
    决定线程数：环境变量 > 配置值 > min(8, cpu_count)

    Args:
        configured: 配置文件中的 advanced.threads，None 表示未设置
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is not None and raw.strip():
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return value
    if configured is not None:
        if int(configured) < 1:
            raise ValueError(f"thread count must be positive, got {configured!r}")
        return int(configured)
    return max(1, min(MAX_DEFAULT_THREADS, os.cpu_count() or 1))


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    并发执行 func，结果顺序与输入一致；任一任务出错时抛出第一个（按输入顺序）异常

    线程数按 resolve_threads 决定；为 1 时在当前线程顺序执行
    """
    work = list(items)
    count = resolve_threads(threads)
    if count <= 1 or len(work) <= 1:
        return [func(item) for item in work]
    logger.debug("并发执行 %d 个任务，线程数 %d", len(work), count)
    with ThreadPoolExecutor(max_workers=min(count, len(work))) as pool:
        futures = [pool.submit(func, item) for item in work]
        return [future.result() for future in futures]
