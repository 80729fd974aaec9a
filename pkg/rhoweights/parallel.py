"""Thread cap and an order-preserving parallel map."""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "RHOWEIGHTS_THREADS"


def _env_threads() -> int:
    raw = os.getenv(THREADS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("ignoring %s=%r (not an integer)", THREADS_ENV, raw)
        return 1


_thread_cap = _env_threads()


def set_thread_cap(threads: int | None) -> int:
    """Set the process-wide thread cap; ``None`` re-reads the environment."""
    global _thread_cap
    _thread_cap = _env_threads() if threads is None else max(1, int(threads))
    return _thread_cap


def thread_cap() -> int:
    return _thread_cap


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map ``fn`` over ``items``; results keep input order for any thread count."""
    items = list(items)
    if _thread_cap <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=_thread_cap) as pool:
        return list(pool.map(fn, items))
