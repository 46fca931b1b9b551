# helpers/retry_helper.py
import random
import time
from typing import Callable, TypeVar

from helpers.logging_helper import get_logger

logger = get_logger("retry")
T = TypeVar("T")

# message fragments that mark a non-retryable server-side failure
_FATAL_MARKERS = ("invalid_request_error", "context_length_exceeded", "invalid api key")


def retry_sync(
    call: Callable[[], T],
    *,
    transient: tuple[type[BaseException], ...],
    retries: int = 3,
    base_delay: float = 0.35,
    factor: float = 2.0,
    cap: float = 5.0,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """
    Run `call`, retrying ONLY on `transient` exceptions whose message does not
    carry a non-retryable marker. Exponential backoff with jitter, capped.
    """
    delay = base_delay

    for attempt in range(retries):
        try:
            if attempt > 0:
                logger.warning(
                    "retry_sync: Attempt %d/%d executing call()", attempt, retries - 1
                )
            return call()

        except transient as exc:
            message = str(exc).lower()

            if any(marker in message for marker in _FATAL_MARKERS):
                logger.error(
                    "retry_sync: Non-retryable failure. Attempts=%d, Error=%s",
                    attempt,
                    exc,
                )
                raise

            if attempt == retries - 1:
                logger.error(
                    "retry_sync: Out of retries for transient error. Attempts=%d Error=%s",
                    attempt,
                    exc,
                )
                raise

            sleep_time = min(delay, cap) + random.uniform(0.0, 0.25)
            logger.warning(
                "retry_sync: Transient error. Retrying in %.2fs. Attempts=%d/%d. Error=%s",
                sleep_time,
                attempt,
                retries - 1,
                exc,
            )
            sleep(sleep_time)
            delay *= factor

    raise RuntimeError("retry_sync: retries must be >= 1")
