# scorers/base.py
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Optional

import config
from backends.base import Backend, canonical_digest
from backends.judgments import build_similarity_matrix
from loader import PromptTemplate, get_templates
from utility.trace_utils import GenerationTrace, SimilarityMatrix


class ScorerInputError(ValueError):
    """A trace lacks something a scorer needs (tokens, samples, tensors, backend)."""


class ScorerParseError(ValueError):
    """A self-check reply could not be parsed into a score."""


@dataclass
class ScorerContext:
    """Shared knobs and per-trace similarity cache for one scoring run."""

    backend: Optional[Backend] = None
    settings: config.ScoringConfig = field(default_factory=config.ScoringConfig)
    sampling: config.SamplingConfig = field(default_factory=config.SamplingConfig)
    prompts: Optional[Mapping[str, PromptTemplate]] = None
    cache_size: int = 4096
    _matrices: OrderedDict = field(default_factory=OrderedDict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.cache_size < 1:
            raise ValueError("cache_size must be >= 1")
        if self.prompts is None:
            self.prompts = get_templates()

    def require_backend(self, method: str) -> Backend:
        if self.backend is None:
            raise ScorerInputError(f"{method}: a backend is required")
        return self.backend

    def full_matrix(self, trace: GenerationTrace) -> SimilarityMatrix:
        """Similarity over [greedy] + samples, computed once per distinct set of texts.

        Keyed on the texts rather than the query id: re-collected traces reuse ids.
        """
        texts = [trace.greedy.text, *(s.text for s in trace.samples)]
        key = canonical_digest(texts)
        with self._lock:
            cached = self._matrices.get(key)
            if cached is not None:
                self._matrices.move_to_end(key)
                return cached
        backend = self.require_backend("similarity")
        sim = build_similarity_matrix(texts, backend)
        with self._lock:
            self._matrices[key] = sim
            while len(self._matrices) > self.cache_size:
                self._matrices.popitem(last=False)
        return sim

    def clear_cache(self) -> None:
        with self._lock:
            self._matrices.clear()

    @property
    def cached_matrices(self) -> int:
        return len(self._matrices)

    def sample_matrix(self, trace: GenerationTrace) -> SimilarityMatrix:
        if not trace.samples:
            raise ScorerInputError("samples required")
        return self.full_matrix(trace).submatrix(range(1, trace.num_samples + 1))
