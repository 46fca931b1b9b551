# utility/logging_utils.py
import os
from dataclasses import dataclass, replace
from typing import Optional

import config

DEFAULT_LOG_FILE = "logs/ue.log"
LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# chatty third-party loggers held at library_level
QUIET_LIBRARIES: tuple[str, ...] = ("asyncio", "numexpr", "urllib3")
# request/response loggers of the HTTP backend, optionally routed to their own file
HTTP_LOGGERS: tuple[str, ...] = ("httpx", "httpcore")


@dataclass(frozen=True, slots=True)
class LogSettings:
    """Where and how loudly a run logs."""

    level: str = "INFO"
    file_path: Optional[str] = DEFAULT_LOG_FILE
    http_file_path: Optional[str] = None
    fmt: str = config.DEFAULT_FMT
    datefmt: str = config.DEFAULT_DATEFMT
    rotate_bytes: int = 5_000_000
    rotate_count: int = 3
    library_level: str = "WARNING"
    http_level: str = "INFO"

    def __post_init__(self):
        for name in ("level", "library_level", "http_level"):
            value = str(getattr(self, name)).upper()
            if value not in LEVELS:
                raise ValueError(f"unknown log level {getattr(self, name)!r} for {name}.")
            object.__setattr__(self, name, value)
        if self.rotate_bytes < 1 or self.rotate_count < 0:
            raise ValueError("rotate_bytes must be >= 1 and rotate_count >= 0.")

    @classmethod
    def from_env(cls, **overrides) -> "LogSettings":
        # LOG_FILE="" turns the file handler off
        base = cls(
            level=os.getenv("LOG_LEVEL") or "INFO",
            file_path=os.getenv("LOG_FILE", DEFAULT_LOG_FILE) or None,
            http_file_path=os.getenv("HTTP_LOG_FILE") or None,
        )
        return base.with_overrides(**overrides)

    def with_overrides(self, **overrides) -> "LogSettings":
        """Copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})
