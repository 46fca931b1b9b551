# utility/trace_utils.py
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Mapping, Optional
import math

import numpy as np

import config

SATURATED = config.SATURATED


def is_saturated(value: float) -> bool:
    return value >= SATURATED or value == math.inf


class GenerationRole(str, Enum):
    GREEDY = "greedy"
    SAMPLE = "sample"


class SimilarityKind(str, Enum):
    NLI_ENTAILMENT = "nli_entailment"
    CONTINUOUS_SIMILARITY = "continuous_similarity"


@dataclass(frozen=True, slots=True)
class QueryRecord:
    id: str
    prompt: str
    ground_truths: tuple[str, ...] = ()
    dataset_tag: str = ""
    transform_tag: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "ground_truths", tuple(self.ground_truths))
        if not self.id:
            raise ValueError("query id cannot be empty.")
        if not self.prompt:
            raise ValueError(f"query {self.id!r}: prompt cannot be empty.")


@dataclass(frozen=True, slots=True)
class TokenEvent:
    token_text: str
    logprob: float

    def __post_init__(self):
        if not math.isfinite(self.logprob) or self.logprob > 0:
            raise ValueError(
                f"token {self.token_text!r}: logprob {self.logprob!r} must be finite and <= 0."
            )


# pylint: disable=too-many-instance-attributes
@dataclass(frozen=True, slots=True)
class Generation:
    text: str
    tokens: tuple[TokenEvent, ...] = ()
    hidden_state: Optional[tuple[float, ...]] = None
    attention_diagonals: Optional[tuple[tuple[float, ...], ...]] = None
    role: GenerationRole = GenerationRole.SAMPLE
    # unknown fields of the generation object, kept for round-trips
    extra: Mapping[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "extra", MappingProxyType(dict(self.extra)))
        if self.hidden_state is not None:
            object.__setattr__(
                self, "hidden_state", tuple(float(x) for x in self.hidden_state)
            )
        if self.attention_diagonals is not None:
            object.__setattr__(
                self,
                "attention_diagonals",
                tuple(tuple(float(x) for x in head) for head in self.attention_diagonals),
            )
        object.__setattr__(self, "role", GenerationRole(self.role))

    @property
    def logprobs(self) -> np.ndarray:
        return np.array([t.logprob for t in self.tokens], dtype=float)

    @property
    def ln_logprob(self) -> float:
        """Length-normalized log-probability (mean token logprob)."""
        if not self.tokens:
            raise ValueError("generation has no tokens; cannot length-normalize.")
        return float(np.mean(self.logprobs))


@dataclass(frozen=True, slots=True)
class GenerationTrace:
    query: QueryRecord
    greedy: Generation
    samples: tuple[Generation, ...] = ()
    temperature: float = 1.0
    paraphrase_answers: Optional[tuple[Generation, ...]] = None
    external_scores: Mapping[str, float] = field(default_factory=dict)
    # unknown top-level fields from the dataset file, kept for round-trips
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.paraphrase_answers is not None:
            object.__setattr__(
                self, "paraphrase_answers", tuple(self.paraphrase_answers)
            )
        object.__setattr__(
            self, "external_scores", MappingProxyType(dict(self.external_scores))
        )
        object.__setattr__(self, "extra", MappingProxyType(dict(self.extra)))
        if self.temperature < 0:
            raise ValueError(f"trace {self.query.id!r}: temperature must be >= 0.")

    @property
    def num_samples(self) -> int:
        return len(self.samples)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SimilarityMatrix:
    """Directional pairwise judgments: forward[i, j] scores i -> j, backward[i, j] scores j -> i."""

    forward: np.ndarray
    backward: np.ndarray
    kind: SimilarityKind = SimilarityKind.NLI_ENTAILMENT

    def __post_init__(self):
        fwd = _frozen(self.forward)
        bwd = _frozen(self.backward)
        if fwd.ndim != 2 or fwd.shape[0] != fwd.shape[1] or fwd.shape != bwd.shape:
            raise ValueError(
                f"similarity matrices must be square and equal-shaped, got {fwd.shape} / {bwd.shape}."
            )
        for name, mat in (("forward", fwd), ("backward", bwd)):
            if np.any(mat < 0) or np.any(mat > 1) or not np.all(np.isfinite(mat)):
                raise ValueError(f"{name} similarity entries must lie in [0, 1].")
            if not np.allclose(np.diag(mat), 1.0):
                raise ValueError(f"{name} similarity diagonal must be 1.")
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "backward", bwd)
        object.__setattr__(self, "kind", SimilarityKind(self.kind))

    @property
    def size(self) -> int:
        return int(self.forward.shape[0])

    def bidirectional(self) -> np.ndarray:
        """min(forward, backward): mutual entailment strength."""
        return np.minimum(self.forward, self.backward)

    def mean(self) -> np.ndarray:
        return (self.forward + self.backward) / 2.0

    def submatrix(self, indices) -> "SimilarityMatrix":
        idx = np.asarray(list(indices), dtype=int)
        return SimilarityMatrix(
            forward=self.forward[np.ix_(idx, idx)],
            backward=self.backward[np.ix_(idx, idx)],
            kind=self.kind,
        )


@dataclass(frozen=True, slots=True)
class UncertaintyScore:
    """Higher value = more uncertain, for every method."""

    method: str
    value: float

    def __post_init__(self):
        if math.isnan(self.value):
            raise ValueError(f"{self.method}: score is NaN.")
        if self.value == math.inf:
            object.__setattr__(self, "value", SATURATED)

    @classmethod
    def from_confidence(cls, method: str, confidence: float) -> "UncertaintyScore":
        return cls(method=method, value=-float(confidence))

    @property
    def saturated(self) -> bool:
        return is_saturated(self.value)


@dataclass(frozen=True, slots=True)
class LabeledTrace:
    trace: GenerationTrace
    label: Optional[int] = None

    def __post_init__(self):
        if self.label not in (None, 0, 1):
            raise ValueError(
                f"trace {self.trace.query.id!r}: label must be 0 (correct) or 1 (incorrect)."
            )


@dataclass(frozen=True, slots=True)
class LabeledDataset:
    entries: tuple[LabeledTrace, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def traces(self) -> list[GenerationTrace]:
        return [e.trace for e in self.entries]

    def labels(self) -> np.ndarray:
        missing = [e.trace.query.id for e in self.entries if e.label is None]
        if missing:
            raise ValueError(f"unlabeled traces: {', '.join(missing[:5])}")
        return np.array([e.label for e in self.entries], dtype=int)

    def by_id(self) -> dict[str, LabeledTrace]:
        return {e.trace.query.id: e for e in self.entries}
