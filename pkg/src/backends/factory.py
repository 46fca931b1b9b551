# backends/factory.py
import config
from backends.base import Backend
from backends.mock import MockBackend
from backends.openai_compat import OpenAICompatBackend
from backends.replay import ReplayBackend
from helpers.logging_helper import get_logger

logger = get_logger("backend.factory")


def build_backend(cfg: config.RunConfig) -> Backend:
    """Backend from the run-config, wrapped in record/replay when configured."""
    replay = cfg.replay
    if replay.mode == "replay":
        if not replay.path:
            raise config.ConfigError("replay.mode=replay needs replay.path")
        logger.info("Using strict replay store %s", replay.path)
        return ReplayBackend(replay.path, inner=None, mode="replay")

    if cfg.backend.kind == "openai":
        inner: Backend = OpenAICompatBackend(cfg.backend)
    else:
        inner = MockBackend(seed=cfg.backend.seed)
    logger.info("Backend: %s (model=%s)", inner.name, cfg.backend.model)

    if replay.mode in ("record", "auto"):
        if not replay.path:
            raise config.ConfigError(f"replay.mode={replay.mode} needs replay.path")
        return ReplayBackend(replay.path, inner=inner, mode=replay.mode)
    return inner
