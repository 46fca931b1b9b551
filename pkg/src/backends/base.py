# backends/base.py
import hashlib
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping, Sequence

from utility.trace_utils import Generation

# request purposes understood by the mock and the replay digest
PURPOSES = (
    "answer",
    "judge",
    "p_true",
    "verbalized",
    "paraphrase",
    "decompose",
    "decompose_claim",
    "question",
    "claim_answer",
    "prompt_tune",
)


class BackendError(RuntimeError):
    """Base error for model interaction."""


class TransientBackendError(BackendError):
    """Transport failure, rate-limit or 5xx; safe to retry."""


class BackendPayloadError(BackendError):
    """Response did not have the expected shape."""


class TraceMissError(BackendError):
    """Strict replay found no recording for a request."""


class JudgeParseError(BackendError, ValueError):
    """Correctness judge produced output that is neither correct nor incorrect."""


@dataclass(frozen=True, slots=True)
class BackendRequest:
    messages: tuple[tuple[str, str], ...]
    max_tokens: int = 128
    temperature: float = 0.0
    n: int = 1
    want_logprobs: bool = True
    purpose: str = "answer"
    # template variables, used by the mock to script replies; not sent over HTTP
    variables: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "messages", tuple((str(r), str(t)) for r, t in self.messages)
        )
        object.__setattr__(self, "variables", MappingProxyType(dict(self.variables)))
        if not self.messages:
            raise ValueError("request needs at least one message.")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}.")
        if self.temperature < 0 or not math.isfinite(self.temperature):
            raise ValueError(f"temperature must be >= 0, got {self.temperature}.")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1.")
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown request purpose {self.purpose!r}.")

    def to_payload(self) -> dict:
        return {
            "messages": [list(m) for m in self.messages],
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "n": self.n,
            "want_logprobs": self.want_logprobs,
            "purpose": self.purpose,
        }

    def digest(self) -> str:
        return canonical_digest(self.to_payload())


@dataclass(frozen=True, slots=True)
class BackendResponse:
    generations: tuple[Generation, ...]
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        object.__setattr__(self, "generations", tuple(self.generations))

    def check_length(self, n: int) -> "BackendResponse":
        if len(self.generations) != n:
            raise BackendPayloadError(
                f"expected {n} generations, got {len(self.generations)}"
            )
        return self

    @property
    def first(self) -> Generation:
        return self.generations[0]


@dataclass(frozen=True, slots=True)
class SimilarityJudgment:
    entail_forward: float
    entail_backward: float

    def __post_init__(self):
        for name in ("entail_forward", "entail_backward"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}.")

    @property
    def bidirectional(self) -> float:
        return min(self.entail_forward, self.entail_backward)

    @property
    def mean(self) -> float:
        return (self.entail_forward + self.entail_backward) / 2.0


def canonical_digest(payload: Any) -> str:
    """sha256 of sorted-key compact JSON; stable under dict field order."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Backend(ABC):
    """Everything the scorers and pipelines need from a model."""

    name: str = "backend"

    @abstractmethod
    def generate(self, req: BackendRequest) -> BackendResponse:
        ...

    @abstractmethod
    def similarity(self, a: str, b: str) -> SimilarityJudgment:
        ...

    @abstractmethod
    def force_decode(self, messages: Sequence[tuple[str, str]], text: str) -> Generation:
        """Per-token logprobs of `text` forced as the reply to `messages`."""

    def close(self) -> None:
        return None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
