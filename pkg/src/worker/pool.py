from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from src.services.logger import get_logger

logger = get_logger("worker_pool")

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Sequence[T], parallelism: int = 1) -> List[R]:
    """
    Applies `fn` to every item, concurrently when parallelism > 1.

    Results always come back in input order, and the first failure (in input
    order) is re-raised after the remaining calls finish.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    if parallelism == 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(parallelism, len(items))
    logger.debug(
        "Dispatching batch",
        extra={"stage": "dispatch", "action_details": f"{len(items)} jobs on {workers} workers"},
    )
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="facebias") as executor:
        futures = [executor.submit(fn, item) for item in items]
        return [future.result() for future in futures]
