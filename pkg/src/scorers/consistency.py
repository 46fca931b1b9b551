# scorers/consistency.py
"""Spectral and clustering scores over the similarity graph of sampled answers."""
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import eigvalsh, expm

from backends.base import Backend, BackendRequest
from backends.judgments import build_similarity_matrix
from helpers.logging_helper import get_logger
from loader import PromptTemplate, get_templates
from scorers.base import ScorerInputError
from utility.graph_utils import SemanticGraph, build_graph, greedy_clusters, sorted_eigh
from utility.trace_utils import Generation, GenerationTrace

__all__ = [
    "build_graph",
    "degmat",
    "degmat_c",
    "sum_eigv",
    "eccentricity",
    "eccentricity_c",
    "kle",
    "cluster_size_entropy",
    "paraphrase_answers",
    "self_detection",
]

logger = get_logger("scorers.consistency")

_PSD_TOL = 1e-9


def _check_index(g: SemanticGraph, j: int) -> None:
    if not 0 <= j < g.size:
        raise ScorerInputError(f"index {j} out of range for graph of size {g.size}")


def degmat(g: SemanticGraph) -> float:
    m = g.size
    return float((m * m - g.degrees.sum()) / (m * m))


def degmat_c(g: SemanticGraph, j: int) -> float:
    """Negated confidence D_jj / m."""
    _check_index(g, j)
    return float(-g.degrees[j] / g.size)


def sum_eigv(g: SemanticGraph) -> float:
    vals = eigvalsh(g.L_norm)
    return float(np.maximum(0.0, 1.0 - vals).sum())


def _centered_embedding(g: SemanticGraph, k: int, eigv_threshold: float) -> np.ndarray:
    if k < 0 or k > g.size:
        raise ScorerInputError(f"k={k} must lie in [0, {g.size}]")
    if k == 0:
        return np.zeros((g.size, 0))
    vals, vecs = sorted_eigh(g.L_norm)
    keep = vals[:k] < eigv_threshold
    emb = vecs[:, :k][:, keep]
    return emb - emb.mean(axis=0, keepdims=True)


def eccentricity(g: SemanticGraph, k: int, eigv_threshold: float = 0.9) -> float:
    """Frobenius norm of centered spectral embeddings (smallest-k eigenvectors below threshold)."""
    return float(np.linalg.norm(_centered_embedding(g, k, eigv_threshold)))


def eccentricity_c(g: SemanticGraph, j: int, k: int, eigv_threshold: float = 0.9) -> float:
    _check_index(g, j)
    return float(np.linalg.norm(_centered_embedding(g, k, eigv_threshold)[j]))


def von_neumann_entropy(rho: np.ndarray) -> float:
    vals = eigvalsh(rho)
    if vals.min() < -_PSD_TOL:
        raise ValueError(f"kernel is not PSD (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    nz = vals[vals > 0]
    return float(-(nz * np.log(nz)).sum())


def kle(g: SemanticGraph, temperature: float = 0.3) -> float:
    """Von Neumann entropy of the unit-trace heat kernel exp(-t L)."""
    if temperature <= 0:
        raise ScorerInputError("heat kernel temperature must be > 0")
    K = expm(-temperature * g.L_unnorm)
    diag = np.sqrt(np.diag(K))
    K = K / np.outer(diag, diag) / g.size
    trace = np.trace(K)
    if abs(trace - 1.0) > 1e-9:
        logger.warning("heat kernel trace %.12f differs from 1", trace)
    return von_neumann_entropy((K + K.T) / 2.0)


def cluster_size_entropy(assignment: Sequence[int]) -> float:
    if not assignment:
        raise ScorerInputError("no answers to cluster")
    sizes = np.bincount(np.asarray(assignment, dtype=int))
    frac = sizes[sizes > 0] / len(assignment)
    return float(-(frac * np.log(frac)).sum())


def paraphrase_answers(
    question: str,
    backend: Backend,
    prompts: Mapping[str, PromptTemplate],
    n_q: int,
    max_tokens: int,
) -> list[Generation]:
    """Answer n_q paraphrases of the question, each greedily."""
    paraphrases: list[str] = []
    for _ in range(n_q):
        variables = {
            "question": question,
            "previous_questions": "; ".join(paraphrases) or "none",
        }
        req = BackendRequest(
            messages=tuple(prompts["paraphrase"].render(**variables)),
            max_tokens=max_tokens,
            temperature=1.0,
            n=1,
            want_logprobs=False,
            purpose="paraphrase",
            variables=variables,
        )
        paraphrases.append(backend.generate(req).first.text.strip())

    answers = []
    for p in paraphrases:
        req = BackendRequest(
            messages=(("user", p),),
            max_tokens=max_tokens,
            temperature=0.0,
            n=1,
            want_logprobs=False,
            purpose="answer",
        )
        answers.append(backend.generate(req).first)
    return answers


def self_detection(
    t: GenerationTrace,
    backend: Backend,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
    n_q: int = 5,
    threshold: float = 0.5,
    max_tokens: int = 128,
) -> float:
    """Cluster-size entropy of answers to paraphrased questions (stored answers win)."""
    if t.paraphrase_answers:
        answers = [g.text for g in t.paraphrase_answers]
    else:
        prompts = prompts or get_templates()
        generated = paraphrase_answers(t.query.prompt, backend, prompts, n_q, max_tokens)
        answers = [g.text for g in generated]
    sim = build_similarity_matrix(answers, backend)
    return cluster_size_entropy(greedy_clusters(sim.bidirectional(), threshold))
