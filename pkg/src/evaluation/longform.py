# evaluation/longform.py
"""Claim-level uncertainty: decompose long answers, score each claim, evaluate PRR."""
import ast
import importlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Literal, Mapping, Optional, Sequence

import numpy as np

import config
from backends.base import Backend, BackendRequest, canonical_digest
from evaluation.metrics import MetricError, ScoredDataset, prr
from helpers.concurrency_helper import map_bounded
from helpers.logging_helper import get_logger
from loader import PromptTemplate, get_templates
from scorers.base import ScorerContext
from scorers.registry import score_trace
from utility.report_utils import ReportRow
from utility.trace_utils import (
    SATURATED,
    Generation,
    GenerationTrace,
    QueryRecord,
    is_saturated,
)

logger = get_logger("evaluation.longform")

Strategy = Literal["naive", "qg", "qag"]
AggregateMode = Literal["min", "max", "mean"]
STRATEGIES: tuple[str, ...] = ("naive", "qg", "qag")
AGGREGATE_MODES: tuple[str, ...] = ("min", "max", "mean")

Messages = tuple[tuple[str, str], ...]
# (prompt messages the response answers, response with token logprobs) -> uncertainty
ClaimScorer = Callable[[Messages, Generation], float]
ClaimLabeler = Callable[[str], int]

# scorers that only look at the response itself; others sample fresh answers
_RESPONSE_ONLY = frozenset({"lns", "mars", "p_true", "verbalized_confidence"})


class DecompositionError(ValueError):
    """The model's claim list could not be parsed, even after a retry."""


@dataclass(frozen=True, slots=True)
class ClaimQuestion:
    question: str
    answer: Optional[Generation] = None
    aligned: Optional[bool] = None


@dataclass(frozen=True, slots=True)
class ClaimRecord:
    claim_text: str
    parent_query: QueryRecord
    strategy: Strategy
    questions: tuple[ClaimQuestion, ...] = ()
    scores: tuple[float, ...] = ()
    label: Optional[int] = None

    def __post_init__(self):
        if not self.claim_text.strip():
            raise ValueError("claim text cannot be empty.")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}.")
        object.__setattr__(self, "questions", tuple(self.questions))
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        expected = 1 if self.strategy == "naive" else len(self.questions)
        if self.scores and len(self.scores) != expected:
            raise ValueError(
                f"{self.strategy} claim needs {expected} scores, got {len(self.scores)}."
            )
        if self.label not in (None, 0, 1):
            raise ValueError(f"claim label must be 0, 1 or None, got {self.label!r}.")

    def aggregate(self, mode: AggregateMode = "mean") -> float:
        return aggregate(self.scores, mode)

    def with_label(self, label: int) -> "ClaimRecord":
        return replace(self, label=int(label))

    def to_dict(self) -> dict:
        return {
            "id": self.parent_query.id,
            "claim": self.claim_text,
            "strategy": self.strategy,
            "questions": [q.question for q in self.questions],
            "aligned": [q.aligned for q in self.questions],
            "scores": list(self.scores),
            "label": self.label,
        }


def aggregate(scores: Sequence[float], mode: AggregateMode = "mean") -> float:
    """min and mean skip saturated scores unless all are; max saturates on any."""
    if not scores:
        raise ValueError("cannot aggregate an empty score list")
    arr = np.asarray(scores, dtype=float)
    finite = arr[~np.array([is_saturated(s) for s in arr])]
    if mode == "max":
        return SATURATED if finite.size < arr.size else float(arr.max())
    if finite.size == 0:
        return SATURATED
    if mode == "min":
        return float(finite.min())
    if mode == "mean":
        return float(finite.mean())
    raise ValueError(f"unknown aggregation mode {mode!r}")


#
# --- decomposition ---
#
def parse_python_list(text: str) -> list[str]:
    """First bracketed Python list of strings in a model reply."""
    start, end = text.find("["), text.rfind("]")
    if start < 0 or end < start:
        raise ValueError(f"no list found in {text[:80]!r}")
    try:
        value = ast.literal_eval(text[start : end + 1])
    except (ValueError, SyntaxError) as e:
        raise ValueError(f"unparseable list {text[start:end + 1][:80]!r}") from e
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ValueError("reply is not a list of strings")
    return [v.strip() for v in value if v.strip()]


def _ask_list(
    backend: Backend, template: PromptTemplate, purpose: str, text: str, max_tokens: int
) -> list[str]:
    req = BackendRequest(
        messages=tuple(template.render(text=text)),
        max_tokens=max_tokens,
        temperature=0.0,
        n=1,
        want_logprobs=False,
        purpose=purpose,
        variables={"text": text},
    )
    last_error: Optional[ValueError] = None
    for attempt in range(2):
        reply = backend.generate(req).first.text
        try:
            return parse_python_list(reply)
        except ValueError as e:
            last_error = e
            logger.warning("%s list parse failed (attempt %d): %s", purpose, attempt + 1, e)
    raise DecompositionError(f"{purpose}: {last_error}") from last_error


def decompose(
    answer: str,
    backend: Backend,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
    max_tokens: int = 1024,
) -> list[str]:
    """Split a long answer into atomic claims, then re-split each claim.

    Claims the second pass maps to an empty list are dropped; duplicates are
    removed case-insensitively, keeping first occurrence order.
    """
    if not answer.strip():
        raise ValueError("cannot decompose an empty answer")
    prompts = prompts or get_templates()
    coarse = _ask_list(backend, prompts["decompose_step1"], "decompose", answer, max_tokens)

    claims: list[str] = []
    seen: set[str] = set()
    for c in coarse:
        for atomic in _ask_list(
            backend, prompts["decompose_step2"], "decompose_claim", c, max_tokens
        ):
            key = atomic.casefold()
            if key not in seen:
                seen.add(key)
                claims.append(atomic)
    logger.debug("decomposed %d sentences into %d claims", len(coarse), len(claims))
    return claims


#
# --- claim scoring strategies ---
#
def _check_claim(c: str) -> None:
    if not c or not c.strip():
        raise ValueError("claim text cannot be empty")


def _check_nq(n_q: int) -> None:
    if n_q < 1:
        raise ValueError(f"n_q must be >= 1, got {n_q}")


def strategy_naive(x: QueryRecord, c: str, scorer: ClaimScorer, backend: Backend) -> float:
    """The claim is scored as the response to the original query."""
    _check_claim(c)
    messages: Messages = (("user", x.prompt),)
    return float(scorer(messages, backend.force_decode(messages, c)))


def generate_questions(
    x: QueryRecord,
    c: str,
    backend: Backend,
    n_q: int,
    prompts: Mapping[str, PromptTemplate],
    temperature: float = 1.0,
    max_tokens: int = 128,
) -> list[str]:
    """n_q questions whose answer is the claim; duplicates are kept."""
    variables = {"main_question": x.prompt, "claim": c}
    req = BackendRequest(
        messages=tuple(prompts["question_generation"].render(**variables)),
        max_tokens=max_tokens,
        temperature=temperature,
        n=n_q,
        want_logprobs=False,
        purpose="question",
        variables=variables,
    )
    return [g.text.strip() for g in backend.generate(req).generations]


def _answer_messages(q: str, prompts: Mapping[str, PromptTemplate]) -> Messages:
    return tuple(prompts["claim_answer"].render(question=q))


def _qg_record(
    x: QueryRecord,
    c: str,
    scorer: ClaimScorer,
    backend: Backend,
    n_q: int,
    prompts: Mapping[str, PromptTemplate],
    temperature: float,
    question_max_tokens: int = 128,
) -> tuple[list[ClaimQuestion], list[float]]:
    questions, scores = [], []
    for q in generate_questions(x, c, backend, n_q, prompts, temperature, question_max_tokens):
        messages = _answer_messages(q, prompts)
        forced = backend.force_decode(messages, c)
        questions.append(ClaimQuestion(question=q, answer=forced, aligned=True))
        scores.append(float(scorer(messages, forced)))
    return questions, scores


def strategy_qg(
    x: QueryRecord,
    c: str,
    scorer: ClaimScorer,
    backend: Backend,
    n_q: int = 5,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
    question_temperature: float = 1.0,
) -> list[float]:
    """Per generated question, the claim itself is scored as the answer."""
    _check_claim(c)
    _check_nq(n_q)
    _, scores = _qg_record(
        x, c, scorer, backend, n_q, prompts or get_templates(), question_temperature
    )
    return scores


def _qag_record(
    x: QueryRecord,
    c: str,
    scorer: ClaimScorer,
    backend: Backend,
    n_q: int,
    prompts: Mapping[str, PromptTemplate],
    temperature: float,
    threshold: float,
    question_max_tokens: int = 128,
    answer_max_tokens: int = 128,
) -> tuple[list[ClaimQuestion], list[float]]:
    questions, scores = [], []
    for q in generate_questions(x, c, backend, n_q, prompts, temperature, question_max_tokens):
        messages = _answer_messages(q, prompts)
        req = BackendRequest(
            messages=messages,
            max_tokens=answer_max_tokens,
            temperature=0.0,
            n=1,
            want_logprobs=True,
            purpose="claim_answer",
            variables={"question": q},
        )
        answer = backend.generate(req).first
        aligned = backend.similarity(c, answer.text.strip()).bidirectional > threshold
        questions.append(ClaimQuestion(question=q, answer=answer, aligned=aligned))
        scores.append(float(scorer(messages, answer)) if aligned else SATURATED)
    return questions, scores


def strategy_qag(
    x: QueryRecord,
    c: str,
    scorer: ClaimScorer,
    backend: Backend,
    n_q: int = 5,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
    question_temperature: float = 1.0,
    threshold: float = 0.5,
) -> list[float]:
    """Per generated question, score the model's own answer if it entails the claim both ways."""
    _check_claim(c)
    _check_nq(n_q)
    _, scores = _qag_record(
        x, c, scorer, backend, n_q, prompts or get_templates(), question_temperature, threshold
    )
    return scores


def score_claim(
    x: QueryRecord,
    c: str,
    strategy: Strategy,
    scorer: ClaimScorer,
    backend: Backend,
    cfg: Optional[config.LongformConfig] = None,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
    threshold: float = 0.5,
) -> ClaimRecord:
    cfg = cfg or config.LongformConfig()
    prompts = prompts or get_templates()
    _check_claim(c)
    if strategy == "naive":
        return ClaimRecord(c, x, "naive", scores=(strategy_naive(x, c, scorer, backend),))
    if strategy == "qg":
        questions, scores = _qg_record(
            x,
            c,
            scorer,
            backend,
            cfg.num_questions,
            prompts,
            cfg.question_temperature,
            cfg.question_max_tokens,
        )
    elif strategy == "qag":
        questions, scores = _qag_record(
            x,
            c,
            scorer,
            backend,
            cfg.num_questions,
            prompts,
            cfg.question_temperature,
            threshold,
            cfg.question_max_tokens,
            cfg.answer_max_tokens,
        )
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return ClaimRecord(c, x, strategy, questions=tuple(questions), scores=tuple(scores))


def score_claims(
    x: QueryRecord,
    claims: Sequence[str],
    strategies: Sequence[Strategy],
    scorer: ClaimScorer,
    backend: Backend,
    cfg: Optional[config.LongformConfig] = None,
    *,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
    parallelism: int = config.DEFAULT_PARALLELISM,
) -> list[ClaimRecord]:
    """Score every (claim, strategy) pair; claims run in parallel, order is preserved."""
    prompts = prompts or get_templates()
    jobs = [(c, s) for c in claims for s in strategies]
    return map_bounded(
        lambda job: score_claim(x, job[0], job[1], scorer, backend, cfg, prompts),
        jobs,
        parallelism=parallelism,
        label=f"claims of {x.id}",
    )


def method_scorer(method: str, ctx: ScorerContext) -> ClaimScorer:
    """Adapt a registered method to a ClaimScorer.

    Response-only methods see the forced response alone; the others also get
    fresh samples for the same prompt from the context backend.
    """
    mid = config.canonical_method_id(method)

    def score(messages: Messages, g: Generation) -> float:
        samples: tuple[Generation, ...] = ()
        if mid not in _RESPONSE_ONLY:
            req = BackendRequest(
                messages=tuple(messages),
                max_tokens=ctx.sampling.max_tokens,
                temperature=ctx.sampling.temperature,
                n=ctx.sampling.num_samples,
                want_logprobs=True,
                purpose="answer",
            )
            samples = ctx.require_backend(mid).generate(req).generations
        query = QueryRecord(
            id="claim-" + canonical_digest({"messages": messages, "text": g.text})[:16],
            prompt=messages[-1][1],
        )
        trace = GenerationTrace(
            query=query, greedy=g, samples=samples, temperature=ctx.sampling.temperature
        )
        return score_trace(trace, [mid], ctx)[mid].value

    return score


#
# --- labeling and evaluation ---
#
def labels_file_labeler(path: str | Path) -> ClaimLabeler:
    """Labels from JSONL lines {"claim": ..., "label": 0|1}; lookup falls back to casefold."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"claim labels file not found: {p}")
    exact: dict[str, int] = {}
    folded: dict[str, int] = {}
    with p.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                claim, label = str(raw["claim"]), int(raw["label"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{p}:{line_no}: bad claim label line: {e}") from e
            if label not in (0, 1):
                raise ValueError(f"{p}:{line_no}: label must be 0 or 1")
            exact[claim] = label
            folded[claim.strip().casefold()] = label

    def label(claim: str) -> int:
        if claim in exact:
            return exact[claim]
        key = claim.strip().casefold()
        if key in folded:
            return folded[key]
        raise KeyError(f"no label for claim {claim!r}")

    return label


def import_labeler(target: str) -> ClaimLabeler:
    module_name, _, attr = target.partition(":")
    if not module_name or not attr:
        raise ValueError(f"labeler must look like 'module:attr', got {target!r}")
    fn = getattr(importlib.import_module(module_name), attr)
    if not callable(fn):
        raise TypeError(f"{target} is not callable")
    return fn


def build_labeler(target: str) -> ClaimLabeler:
    """A labels file path, or an importable 'module:attr' callable."""
    if Path(target).exists() or ":" not in target:
        return labels_file_labeler(target)
    return import_labeler(target)


def label_claims(claims: Sequence[ClaimRecord], labeler: ClaimLabeler) -> list[ClaimRecord]:
    return [c.with_label(labeler(c.claim_text)) for c in claims]


def evaluate_claims(
    claims: Sequence[ClaimRecord],
    modes: Sequence[AggregateMode] = AGGREGATE_MODES,
    name: str = "claims",
) -> list[ReportRow]:
    """PRR over the pooled claims per strategy and aggregation mode.

    Naive claims carry one score, so they get a single "naive" row.
    """
    unlabeled = [c.claim_text for c in claims if c.label is None]
    if unlabeled:
        raise MetricError(f"{len(unlabeled)} unlabeled claims, e.g. {unlabeled[0]!r}")

    rows: list[ReportRow] = []
    for strategy in STRATEGIES:
        group = [c for c in claims if c.strategy == strategy]
        if not group:
            continue
        labels = [c.label for c in group]
        for mode in ("mean",) if strategy == "naive" else modes:
            d = ScoredDataset.from_arrays([c.aggregate(mode) for c in group], labels)
            cell = strategy if strategy == "naive" else f"{strategy}:{mode}"
            rows.append(ReportRow(method=cell, cal_set=name, metric="prr", mean=prr(d)))
    return rows
