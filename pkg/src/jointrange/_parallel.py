"""Thread fan-out for embarrassingly parallel sweeps.

LAPACK calls release the GIL, so a thread pool is enough.  The pool size is
read from the ``NRF_THREADS`` environment variable (default 1).  Results are
always returned in input order, so output does not depend on the pool size.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

A = TypeVar("A")
B = TypeVar("B")


def thread_count() -> int:
    raw = os.environ.get("NRF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(fn: Callable[[A], B], items: Iterable[A]) -> list[B]:
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
