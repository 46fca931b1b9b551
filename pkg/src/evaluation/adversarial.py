# evaluation/adversarial.py
"""Iterative search for an instruction prefix that degrades uncertainty estimates."""
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

import config
from backends.base import Backend, BackendRequest
from backends.judgments import judge_correctness
from evaluation.harness import ScoreRow, collect_trace, rows_to_table
from evaluation.metrics import MetricError, prr
from helpers.logging_helper import get_logger
from loader import PromptTemplate, get_templates
from scorers.base import ScorerContext
from scorers.registry import score_trace
from utility.trace_utils import LabeledDataset
from utility.transform_utils import apply_adversarial

logger = get_logger("evaluation.adversarial")

DEFAULT_PROBES: tuple[str, ...] = ("lns", "eccentricity", "kle")


@dataclass(frozen=True, slots=True)
class CandidateResult:
    prompt: str
    prr: Mapping[str, float]
    accuracy: float

    @property
    def mean_prr(self) -> float:
        return float(np.mean(list(self.prr.values()))) if self.prr else 0.0

    def describe(self) -> str:
        per_method = ", ".join(f"{m}={v:.3f}" for m, v in self.prr.items())
        return (
            f"Prompt: {self.prompt or '(none)'}\n"
            f"PRR: {per_method}\n"
            f"Accuracy: {self.accuracy:.3f}"
        )


@dataclass(frozen=True, slots=True)
class SearchResult:
    best: CandidateResult
    baseline: CandidateResult
    history: tuple[CandidateResult, ...] = field(default_factory=tuple)


CandidateEvaluator = Callable[[str], CandidateResult]


def make_evaluator(
    train: LabeledDataset,
    probes: Sequence[str],
    backend: Backend,
    ctx: ScorerContext,
    sampling: Optional[config.SamplingConfig] = None,
) -> CandidateEvaluator:
    """Re-collect and re-judge every training query under the candidate prefix."""

    def evaluate(prompt: str) -> CandidateResult:
        # matrices from earlier candidates never match again
        ctx.clear_cache()
        rows = []
        for entry in train:
            x = apply_adversarial(entry.trace.query, prompt)
            trace = collect_trace(x, backend, sampling)
            label = judge_correctness(entry.trace.query, trace.greedy.text, backend)
            scores = score_trace(trace, probes, ctx)
            rows.append(
                ScoreRow(id=x.id, label=label, scores={m: s.value for m, s in scores.items()})
            )
        table = rows_to_table(rows, probes)
        per_method = {}
        for m in probes:
            try:
                per_method[m] = prr(table.dataset(m))
            except MetricError as e:
                logger.warning("candidate %r: no PRR for %s (%s)", prompt[:40], m, e)
                per_method[m] = 0.0
        accuracy = float(1.0 - table.labels.mean())
        return CandidateResult(prompt=prompt, prr=per_method, accuracy=accuracy)

    return evaluate


def propose(
    backend: Backend,
    history: Sequence[CandidateResult],
    iteration: int,
    prompts: Mapping[str, PromptTemplate],
    max_tokens: int = 256,
) -> str:
    text = "\n\n".join(h.describe() for h in history)
    req = BackendRequest(
        messages=tuple(prompts["prompt_tune"].render(history=text)),
        max_tokens=max_tokens,
        temperature=1.0,
        n=1,
        want_logprobs=False,
        purpose="prompt_tune",
        variables={"history": text, "iteration": iteration},
    )
    return backend.generate(req).first.text.strip()


def adversarial_search(
    evaluate: CandidateEvaluator,
    backend: Backend,
    iterations: int = 15,
    *,
    accuracy_budget: float = 0.0,
    initial_prompt: str = "",
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
) -> SearchResult:
    """Lowest mean probe PRR among candidates whose accuracy drop stays within budget.

    The initial prompt is always eligible, so it wins when nothing else qualifies.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    prompts = prompts or get_templates()
    baseline = evaluate(initial_prompt)
    history = [baseline]
    best = baseline
    for i in range(iterations):
        candidate = evaluate(propose(backend, history, i, prompts))
        history.append(candidate)
        eligible = candidate.accuracy >= baseline.accuracy - accuracy_budget - 1e-12
        logger.info(
            "iteration %d: mean PRR %.3f, accuracy %.3f%s",
            i + 1,
            candidate.mean_prr,
            candidate.accuracy,
            "" if eligible else " (over budget)",
        )
        if eligible and candidate.mean_prr < best.mean_prr:
            best = candidate
    return SearchResult(best=best, baseline=baseline, history=tuple(history))
