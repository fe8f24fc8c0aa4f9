#!/usr/bin/env python3
"""Ordered thread-pool map with an optional progress bar."""

import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from tqdm import tqdm

from photoacoustic.models import ReconConfig

T = TypeVar("T")
R = TypeVar("R")


def progress_enabled(cfg: ReconConfig) -> bool:
    return cfg.run.progress and sys.stderr.isatty()


def map_ordered(fn: Callable[[T], R], items: Sequence[T], workers: int = 1, progress: bool = False, desc: str = "") -> List[R]:
    """fn over items; results come back in item order for any worker count"""
    items = list(items)
    with tqdm(total=len(items), desc=desc, leave=False, disable=not progress) as bar:
        if workers <= 1:
            results = []
            for item in items:
                results.append(fn(item))
                bar.update(1)
            return results
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, item) for item in items]
            results = []
            for future in futures:
                results.append(future.result())
                bar.update(1)
            return results
