# helpers/concurrency_helper.py
import asyncio
import threading
from typing import Callable, Iterable, Optional, TypeVar

from helpers.logging_helper import add_throttle, get_logger

import config

T = TypeVar("T")
R = TypeVar("R")

logger = get_logger("concurrency")
progress_log = get_logger("concurrency.progress")
add_throttle(progress_log, 5.0)


class BatchAbortedError(RuntimeError):
    """A sibling call timed out, so this call was never started."""


async def _bounded(
    sem: asyncio.Semaphore,
    call: Callable[[], R],
    timeout: Optional[float],
    abort: threading.Event,
) -> R:
    async with sem:
        if abort.is_set():
            raise BatchAbortedError("batch aborted after a timeout")
        try:
            if timeout is None:
                return await asyncio.to_thread(call)
            return await asyncio.wait_for(asyncio.to_thread(call), timeout=timeout)
        except asyncio.TimeoutError:
            # set before the slot is released so queued calls see it
            abort.set()
            logger.error(
                "call timed out after %ss; its worker thread keeps running detached",
                timeout,
                exc_info=True,
            )
            raise


async def gather_bounded(
    fn: Callable[[T], R],
    items: Iterable[T],
    *,
    parallelism: int = config.DEFAULT_PARALLELISM,
    timeout: Optional[float] = None,
    label: str = "items",
) -> list[R]:
    """Apply blocking `fn` to each item in worker threads, at most `parallelism` in flight.

    Results keep the item order. The first timeout stops calls that have not started yet.
    """
    items = list(items)
    sem = asyncio.Semaphore(max(1, parallelism))
    abort = threading.Event()
    done = 0

    async def one(item: T) -> R:
        nonlocal done
        result = await _bounded(sem, lambda: fn(item), timeout, abort)
        done += 1
        progress_log.info("%s: %d/%d done", label, done, len(items))
        return result

    return list(await asyncio.gather(*(one(i) for i in items)))


def map_bounded(
    fn: Callable[[T], R],
    items: Iterable[T],
    *,
    parallelism: int = config.DEFAULT_PARALLELISM,
    timeout: Optional[float] = None,
    label: str = "items",
) -> list[R]:
    """Synchronous entry to gather_bounded for CLI code paths.

    Threads cannot be interrupted: a timed-out call runs to completion in the
    background, and asyncio.run waits for in-flight calls before the
    TimeoutError reaches the caller.
    """
    return asyncio.run(
        gather_bounded(fn, items, parallelism=parallelism, timeout=timeout, label=label)
    )
