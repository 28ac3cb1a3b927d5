"""Order-preserving, deterministic parallel map over independent tasks."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

from threadpoolctl import threadpool_limits

logger = logging.getLogger(__name__)


def _init_worker() -> None:
    # one BLAS/FFT thread per worker keeps reductions identical to the serial path
    os.environ["OMP_NUM_THREADS"] = "1"
    threadpool_limits(1)


def _run_with_retry(func: Callable, task: Any) -> Any:
    try:
        return func(task)
    except Exception:  # noqa: BLE001 - retried once, then surfaced
        logger.warning("task failed, retrying once", exc_info=True)
        return func(task)


def parallel_sweep(func: Callable[[Any], Any], tasks: Sequence[Any], workers: int = 1) -> list:
    """
    Apply ``func`` to every task and return the results in input order.

    ``func`` must be a picklable top-level function of one argument and pure;
    results are then bit-identical for any ``workers``. A failing task is
    retried once; a second failure propagates.
    """
    tasks = list(tasks)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(tasks) <= 1:
        with threadpool_limits(1):
            return [_run_with_retry(func, t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), initializer=_init_worker) as pool:
        futures = [pool.submit(_run_with_retry, func, t) for t in tasks]
        return [f.result() for f in futures]


def chunked(items: Sequence[Any], size: int) -> list[list[Any]]:
    items = list(items)
    return [items[i : i + size] for i in range(0, len(items), size)]
