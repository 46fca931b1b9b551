# backends/replay.py
import json
import threading
from pathlib import Path
from typing import Any, Callable, Literal, Optional, Sequence

from backends.base import (
    Backend,
    BackendRequest,
    BackendResponse,
    SimilarityJudgment,
    TraceMissError,
    canonical_digest,
)
from data.dataset import generation_from_dict, generation_to_dict
from helpers.logging_helper import get_logger
from utility.trace_utils import Generation, GenerationRole

logger = get_logger("backend.replay")

ReplayMode = Literal["record", "replay", "auto"]


def _gen_out(g: Generation) -> dict:
    return {**generation_to_dict(g), "role": g.role.value}


def _gen_in(raw: dict) -> Generation:
    body = dict(raw)
    role = GenerationRole(body.pop("role", "sample"))
    return generation_from_dict(body, role)


class ReplayBackend(Backend):
    """
    Record/replay wrapper keyed by a canonical request digest.

    record: always call the inner backend and append to the store.
    replay: answer only from the store; a miss raises TraceMissError.
    auto:   replay on hit, record on miss.
    """

    name = "replay"

    def __init__(
        self,
        path: str | Path,
        inner: Optional[Backend] = None,
        mode: ReplayMode = "auto",
    ):
        if mode not in ("record", "replay", "auto"):
            raise ValueError(f"unknown replay mode {mode!r}")
        if mode != "replay" and inner is None:
            raise ValueError(f"replay mode {mode!r} needs an inner backend")
        self.path = Path(path)
        self.inner = inner
        self.mode = mode
        self._store: dict[str, Any] = {}
        self._lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        with self.path.open(encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    rec = json.loads(line)
                    self._store[rec["key"]] = rec["response"]
        logger.info("replay store %s: %d recordings", self.path, len(self._store))

    def _append(self, key: str, op: str, request: Any, response: Any) -> None:
        line = json.dumps(
            {"key": key, "op": op, "request": request, "response": response},
            ensure_ascii=False,
        )
        with self._lock:
            self._store[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as f:
                f.write(line + "\n")

    def _through(self, op: str, request: Any, live: Callable[[], Any]) -> Any:
        key = canonical_digest({"op": op, "request": request})
        if self.mode != "record":
            with self._lock:
                hit = self._store.get(key)
            if hit is not None:
                return hit
            if self.mode == "replay":
                raise TraceMissError(f"trace miss for {op} request {key[:12]}")
        response = live()
        self._append(key, op, request, response)
        return response

    #
    # --- Backend interface ---
    #
    def generate(self, req: BackendRequest) -> BackendResponse:
        def live():
            resp = self.inner.generate(req)
            return {
                "generations": [_gen_out(g) for g in resp.generations],
                "usage": [resp.prompt_tokens, resp.completion_tokens],
            }

        raw = self._through("generate", req.to_payload(), live)
        gens = tuple(_gen_in(g) for g in raw["generations"])
        prompt_tokens, completion_tokens = raw.get("usage", [0, 0])
        return BackendResponse(gens, prompt_tokens, completion_tokens).check_length(req.n)

    def similarity(self, a: str, b: str) -> SimilarityJudgment:
        def live():
            j = self.inner.similarity(a, b)
            return [j.entail_forward, j.entail_backward]

        forward, backward = self._through("similarity", [a, b], live)
        return SimilarityJudgment(forward, backward)

    def force_decode(self, messages: Sequence[tuple[str, str]], text: str) -> Generation:
        request = {"messages": [list(m) for m in messages], "text": text}
        raw = self._through(
            "force_decode", request, lambda: _gen_out(self.inner.force_decode(messages, text))
        )
        return _gen_in(raw)

    def close(self) -> None:
        if self.inner is not None:
            self.inner.close()
