# helpers/logging_helper.py
import logging
import sys
import time
from dataclasses import dataclass, field
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Callable, Optional

from utility.logging_utils import HTTP_LOGGERS, QUIET_LIBRARIES, LogSettings

ROOT_NAME = "ue"


class EveryNSecondsFilter(logging.Filter):
    """Let one record through per window; the rest are dropped."""

    def __init__(self, seconds: float, clock: Callable[[], float] = time.monotonic):
        super().__init__()
        self.seconds = seconds
        self._clock = clock
        self._last: Optional[float] = None

    def filter(self, record: logging.LogRecord) -> bool:
        now = self._clock()
        if self._last is not None and now - self._last < self.seconds:
            return False
        self._last = now
        return True


@dataclass
class _Installed:
    root: list[logging.Handler] = field(default_factory=list)
    http: Optional[logging.Handler] = None


# handlers owned by setup_logging; anything else on the root logger is left alone
_installed = _Installed()


def _rotating(path: str, s: LogSettings, fmt: logging.Formatter) -> Optional[logging.Handler]:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        handler = RotatingFileHandler(
            path, maxBytes=s.rotate_bytes, backupCount=s.rotate_count, encoding="utf-8"
        )
    except OSError:
        logging.getLogger(ROOT_NAME).exception("cannot open log file %s; skipping it", path)
        return None
    handler.setFormatter(fmt)
    return handler


def _install_root(s: LogSettings, fmt: logging.Formatter) -> None:
    root = logging.getLogger()
    for h in _installed.root:
        root.removeHandler(h)
        h.close()

    console = logging.StreamHandler(sys.stdout)
    console.setFormatter(fmt)
    handlers: list[logging.Handler] = [console]
    if s.file_path:
        file_handler = _rotating(s.file_path, s, fmt)
        if file_handler is not None:
            handlers.append(file_handler)

    for h in handlers:
        root.addHandler(h)
    _installed.root = handlers
    root.setLevel(s.level)
    for name in QUIET_LIBRARIES:
        logging.getLogger(name).setLevel(s.library_level)


def _install_http(s: LogSettings, fmt: logging.Formatter) -> None:
    old = _installed.http
    handler = _rotating(s.http_file_path, s, fmt) if s.http_file_path else None
    for name in HTTP_LOGGERS:
        log = logging.getLogger(name)
        if old is not None:
            log.removeHandler(old)
        log.propagate = False
        if handler is None:
            # no dedicated file: only problems surface
            log.setLevel(logging.WARNING)
        else:
            log.setLevel(s.http_level)
            log.addHandler(handler)
    if old is not None:
        old.close()
    _installed.http = handler


def setup_logging(settings: Optional[LogSettings] = None, **overrides) -> LogSettings:
    """
    Configure console, rotating-file and HTTP logging for a run.

    Repeated calls replace the handlers of the previous call, so output never
    doubles. Returns the settings actually applied.
    """
    s = (settings or LogSettings.from_env()).with_overrides(**overrides)
    fmt = logging.Formatter(s.fmt, s.datefmt)
    _install_root(s, fmt)
    _install_http(s, fmt)
    logging.captureWarnings(True)
    logging.getLogger(ROOT_NAME).debug(
        "logging at %s (file=%s, http=%s)", s.level, s.file_path, s.http_file_path
    )
    return s


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(f"{ROOT_NAME}.{name}")


def add_throttle(logger: logging.Logger, seconds: float) -> None:
    logger.addFilter(EveryNSecondsFilter(seconds))
