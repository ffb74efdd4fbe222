from __future__ import annotations

from functools import wraps
from typing import Any, Callable, Tuple, Type, TypeVar

from tenacity import (
    RetryCallState,
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
    wait_none,
)

from src.services.logger import get_logger

logger = get_logger("retry_util")

F = TypeVar("F", bound=Callable[..., Any])


def _log_failure(service: str) -> Callable[[RetryCallState], None]:
    def before_sleep(state: RetryCallState) -> None:
        error = state.outcome.exception() if state.outcome else None
        name = getattr(state.fn, "__name__", "call")
        logger.error(
            "Call failed, retrying",
            extra={
                "service": service,
                "stage": "retry",
                "action_details": f"{name} failed on attempt {state.attempt_number}",
                "error": str(error),
            },
        )

    return before_sleep


def retry(
    max_attempts: int = 2,
    delay: float = 0.0,
    retry_on: Tuple[Type[BaseException], ...] = (Exception,),
    service: str = "retry_util",
) -> Callable[[F], F]:
    """
    Retry decorator with exponential backoff and structured logging.

    `delay` is the first backoff interval in seconds; it doubles on every
    further attempt. The final exception is re-raised unchanged.
    """

    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")

    wait = wait_exponential(multiplier=delay, min=delay) if delay > 0 else wait_none()

    def decorator(func: F) -> F:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            retrying = Retrying(
                stop=stop_after_attempt(max_attempts),
                wait=wait,
                retry=retry_if_exception_type(retry_on),
                before_sleep=_log_failure(service),
                reraise=True,
            )
            try:
                result = retrying(func, *args, **kwargs)
            except retry_on as e:
                logger.error(
                    "Max retry attempts reached",
                    extra={
                        "service": service,
                        "stage": "retry_exhausted",
                        "action_details": f"{func.__name__} failed after {max_attempts} attempts",
                        "error": str(e),
                    },
                )
                raise

            attempts = retrying.statistics.get("attempt_number", 1)
            if attempts > 1:
                logger.info(
                    "Call succeeded after retry",
                    extra={
                        "service": service,
                        "stage": "retry",
                        "action_details": f"{func.__name__} succeeded on attempt {attempts}",
                    },
                )
            return result

        return wrapper  # type: ignore[return-value]

    return decorator
