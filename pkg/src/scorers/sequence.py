# scorers/sequence.py
"""Probability-based and self-checking scorers over a single trace."""
import math
import re
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

import config
from backends.base import Backend, BackendRequest
from helpers.logging_helper import get_logger
from loader import PromptTemplate, get_templates
from scorers.base import ScorerInputError, ScorerParseError
from utility.graph_utils import greedy_clusters
from utility.trace_utils import (
    SATURATED,
    Generation,
    GenerationTrace,
    SimilarityMatrix,
)

logger = get_logger("scorers.sequence")

_TF_RE = re.compile(r"[^a-z]")
_CONFIDENCE_RE = re.compile(r"(?<![\d.])(\d{1,3})(?![\d.])")


@dataclass(frozen=True, slots=True)
class TokenWeighting:
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ValueError("token weights must be finite and >= 0.")

    @classmethod
    def uniform(cls, length: int) -> "TokenWeighting":
        return cls(weights=(1.0,) * length)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)


@dataclass(frozen=True, slots=True)
class SemanticClusters:
    assignment: tuple[int, ...]
    cluster_prob: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))
        object.__setattr__(self, "cluster_prob", tuple(float(p) for p in self.cluster_prob))
        if abs(sum(self.cluster_prob) - 1.0) > 1e-9:
            raise ValueError(f"cluster probabilities sum to {sum(self.cluster_prob)}, not 1.")
        if self.assignment and max(self.assignment) >= len(self.cluster_prob):
            raise ValueError("assignment references an unknown cluster.")

    @property
    def num_clusters(self) -> int:
        return len(self.cluster_prob)


def _require_tokens(g: Generation, what: str = "generation") -> np.ndarray:
    if not g.tokens:
        raise ScorerInputError(f"{what} has no tokens")
    return g.logprobs


#
# --- length-normalized probability family ---
#
def lns(g: Generation) -> float:
    lp = _require_tokens(g)
    return float(-np.mean(lp))


def weighted_lns(g: Generation, w: TokenWeighting) -> float:
    lp = _require_tokens(g)
    weights = w.as_array()
    if weights.shape != lp.shape:
        raise ScorerInputError(
            f"weight length {weights.size} does not match {lp.size} tokens"
        )
    return float(-np.dot(weights, lp) / lp.size)


def token_removal_relevance(g: Generation, backend: Backend) -> np.ndarray:
    """1 - mean similarity(sentence without token l, full sentence), per token."""
    _require_tokens(g)
    texts = [t.token_text for t in g.tokens]
    full = "".join(texts).strip()
    raw = np.zeros(len(texts))
    for l in range(len(texts)):
        reduced = "".join(texts[:l] + texts[l + 1 :]).strip()
        judgment = backend.similarity(reduced, full)
        raw[l] = 1.0 - judgment.mean
    return raw


def token_importance_weights(query: str, g: Generation, backend: Backend) -> TokenWeighting:
    """Token weights proportional to relevance, renormalized to sum to the token count."""
    length = len(_require_tokens(g))
    if length == 1:
        return TokenWeighting((1.0,))
    raw = token_removal_relevance(g, backend)
    total = raw.sum()
    if total <= 0:
        logger.debug("no token relevance signal for %r; using uniform weights", query[:40])
        return TokenWeighting.uniform(length)
    return TokenWeighting(tuple(raw * length / total))


#
# --- sample-set estimators ---
#
def _sample_ln_logprobs(t: GenerationTrace) -> np.ndarray:
    if not t.samples:
        raise ScorerInputError("samples required")
    return np.array(
        [float(np.mean(_require_tokens(s, f"sample {i}"))) for i, s in enumerate(t.samples)]
    )


def mc_entropy(t: GenerationTrace) -> float:
    return float(-np.mean(_sample_ln_logprobs(t)))


def _check_matrix(t: GenerationTrace, sim: SimilarityMatrix) -> None:
    if sim.size != t.num_samples:
        raise ScorerInputError(
            f"similarity matrix covers {sim.size} items, trace has {t.num_samples} samples"
        )


def semantic_clusters(
    t: GenerationTrace, sim: SimilarityMatrix, threshold: float = 0.5
) -> SemanticClusters:
    _check_matrix(t, sim)
    probs = np.exp(_sample_ln_logprobs(t))
    assignment = greedy_clusters(sim.bidirectional(), threshold)
    mass = np.zeros(max(assignment) + 1)
    np.add.at(mass, assignment, probs)
    return SemanticClusters(tuple(assignment), tuple(mass / mass.sum()))


def semantic_entropy(t: GenerationTrace, sim: SimilarityMatrix, threshold: float = 0.5) -> float:
    clusters = semantic_clusters(t, sim, threshold)
    return float(-np.mean(np.log(clusters.cluster_prob)))


def _relevance_entropy(probs: np.ndarray, relevance: np.ndarray, temperature: float) -> float:
    off = relevance * (1.0 - np.eye(len(probs)))
    boosted = probs + off @ probs / temperature
    return float(-np.mean(np.log(boosted)))


def sentsar(t: GenerationTrace, sim: SimilarityMatrix, temperature: float = 1.0) -> float:
    """Entropy over samples whose probabilities are boosted by similar samples."""
    _check_matrix(t, sim)
    probs = np.exp(_sample_ln_logprobs(t))
    return _relevance_entropy(probs, sim.mean(), temperature)


def sar(
    t: GenerationTrace,
    sim: SimilarityMatrix,
    backend: Backend,
    temperature: float = 1.0,
) -> float:
    """SentSAR over token-importance-weighted sequence probabilities."""
    _check_matrix(t, sim)
    if not t.samples:
        raise ScorerInputError("samples required")
    probs = np.array(
        [
            math.exp(-weighted_lns(s, token_importance_weights(t.query.prompt, s, backend)))
            for s in t.samples
        ]
    )
    return _relevance_entropy(probs, sim.mean(), temperature)


#
# --- self-checks ---
#
def _ask(backend: Backend, template: PromptTemplate, purpose: str, want_logprobs: bool, **variables) -> Generation:
    req = BackendRequest(
        messages=tuple(template.render(**variables)),
        max_tokens=16,
        temperature=0.0,
        n=1,
        want_logprobs=want_logprobs,
        purpose=purpose,
        variables=variables,
    )
    return backend.generate(req).first


def p_true_from_generation(g: Generation) -> float:
    """-ln P(true) from the last true/false token of the evaluator's reply."""
    for tok in reversed(g.tokens):
        word = _TF_RE.sub("", tok.token_text.lower())
        if word == "true":
            return abs(tok.logprob)
        if word == "false":
            p_true = -math.expm1(tok.logprob)
            return SATURATED if p_true <= 0 else -math.log(p_true)
    raise ScorerParseError(f"no true/false token in evaluator reply {g.text!r}")


def p_true(
    t: GenerationTrace,
    backend: Backend,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
) -> float:
    prompts = prompts or get_templates()
    reply = _ask(
        backend,
        prompts["p_true"],
        "p_true",
        True,
        question=t.query.prompt,
        sampled_generations="\n".join(s.text for s in t.samples),
        generated_text=t.greedy.text,
    )
    return p_true_from_generation(reply)


def parse_confidence(text: str) -> int:
    match = _CONFIDENCE_RE.search(text)
    if not match or int(match.group(1)) > 100:
        raise ScorerParseError(f"no confidence in [0, 100] found in {text!r}")
    return int(match.group(1))


def verbalized_confidence(
    t: GenerationTrace,
    backend: Backend,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
) -> float:
    prompts = prompts or get_templates()
    last_error: Optional[ScorerParseError] = None
    for attempt in range(2):
        reply = _ask(
            backend,
            prompts["verbalized_confidence"],
            "verbalized",
            False,
            question=t.query.prompt,
            generated_text=t.greedy.text,
        )
        try:
            return 1.0 - parse_confidence(reply.text) / 100.0
        except ScorerParseError as e:
            last_error = e
            logger.warning("verbalized confidence parse failed (attempt %d): %s", attempt + 1, e)
    raise last_error


def external_score(t: GenerationTrace, method: str) -> float:
    method = config.canonical_method_id(method)
    if method not in t.external_scores:
        raise ScorerInputError(f"external score {method!r} missing for {t.query.id!r}")
    return -float(t.external_scores[method])
