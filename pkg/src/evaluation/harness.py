# evaluation/harness.py
"""Collect, label and score traces; read and write per-trace score files."""
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

import config
from backends.base import Backend, BackendRequest
from backends.judgments import judge_correctness
from data.dataset import DatasetError
from evaluation.metrics import MetricError, ScoreTable
from helpers.concurrency_helper import map_bounded
from helpers.logging_helper import get_logger
from loader import PromptTemplate, get_templates
from scorers.base import ScorerContext
from scorers.consistency import paraphrase_answers
from scorers.registry import score_trace
from utility.trace_utils import (
    Generation,
    GenerationRole,
    GenerationTrace,
    LabeledDataset,
    LabeledTrace,
    QueryRecord,
)

logger = get_logger("evaluation.harness")


@dataclass(frozen=True, slots=True)
class ScoreRow:
    id: str
    label: Optional[int]
    scores: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "scores", MappingProxyType({k: float(v) for k, v in self.scores.items()})
        )
        if self.label not in (None, 0, 1):
            raise ValueError(f"row {self.id!r}: label must be 0, 1 or null.")
        if any(math.isnan(v) for v in self.scores.values()):
            raise ValueError(f"row {self.id!r}: NaN score.")

    def to_dict(self) -> dict:
        return {"id": self.id, "label": self.label, "scores": dict(self.scores)}


#
# --- collection ---
#
def collect_trace(
    x: QueryRecord,
    backend: Backend,
    sampling: Optional[config.SamplingConfig] = None,
    *,
    with_paraphrases: bool = False,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
) -> GenerationTrace:
    """Greedy answer, B temperature samples and optionally paraphrase answers for one query."""
    sampling = sampling or config.SamplingConfig()
    messages = (("user", x.prompt),)
    greedy = backend.generate(
        BackendRequest(messages=messages, max_tokens=sampling.max_tokens, temperature=0.0)
    ).first
    samples = ()
    if sampling.num_samples > 0:
        samples = backend.generate(
            BackendRequest(
                messages=messages,
                max_tokens=sampling.max_tokens,
                temperature=sampling.temperature,
                n=sampling.num_samples,
            )
        ).generations
    paraphrased = None
    if with_paraphrases:
        paraphrased = tuple(
            paraphrase_answers(
                x.prompt,
                backend,
                prompts or get_templates(),
                sampling.num_paraphrases,
                sampling.max_tokens,
            )
        )
    return GenerationTrace(
        query=x,
        greedy=_with_role(greedy, GenerationRole.GREEDY),
        samples=tuple(_with_role(s, GenerationRole.SAMPLE) for s in samples),
        temperature=sampling.temperature,
        paraphrase_answers=paraphrased,
    )


def _with_role(g: Generation, role: GenerationRole) -> Generation:
    return g if g.role == role else replace(g, role=role)


def collect_dataset(
    queries: Sequence[QueryRecord],
    backend: Backend,
    sampling: Optional[config.SamplingConfig] = None,
    *,
    with_paraphrases: bool = False,
    parallelism: int = config.DEFAULT_PARALLELISM,
) -> list[GenerationTrace]:
    return map_bounded(
        lambda x: collect_trace(x, backend, sampling, with_paraphrases=with_paraphrases),
        queries,
        parallelism=parallelism,
        label="collect",
    )


def label_dataset(
    traces: Iterable[GenerationTrace],
    backend: Backend,
    *,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
    parallelism: int = config.DEFAULT_PARALLELISM,
) -> LabeledDataset:
    """Label each greedy answer with the correctness judge (1 = incorrect)."""
    traces = list(traces)
    prompts = prompts or get_templates()
    labels = map_bounded(
        lambda t: judge_correctness(t.query, t.greedy.text, backend, prompts),
        traces,
        parallelism=parallelism,
        label="judge",
    )
    wrong = sum(labels)
    logger.info("labeled %d traces: %d incorrect", len(traces), wrong)
    return LabeledDataset(tuple(LabeledTrace(t, l) for t, l in zip(traces, labels)))


#
# --- scoring ---
#
def score_dataset(
    ds: LabeledDataset,
    methods: Sequence[str],
    ctx: ScorerContext,
    *,
    parallelism: int = config.DEFAULT_PARALLELISM,
) -> list[ScoreRow]:
    def one(entry: LabeledTrace) -> ScoreRow:
        scores = score_trace(entry.trace, methods, ctx)
        return ScoreRow(
            id=entry.trace.query.id,
            label=entry.label,
            scores={m: s.value for m, s in scores.items()},
        )

    rows = map_bounded(one, ds.entries, parallelism=parallelism, label="score")
    logger.info("scored %d traces with %d methods", len(rows), len(methods))
    return rows


def rows_to_table(rows: Sequence[ScoreRow], methods: Optional[Sequence[str]] = None) -> ScoreTable:
    """Labeled rows to a method-aligned table; every row needs every method."""
    if not rows:
        raise MetricError("no score rows")
    unlabeled = [r.id for r in rows if r.label is None]
    if unlabeled:
        raise MetricError(f"unlabeled rows: {', '.join(unlabeled[:5])}")
    methods = list(methods) if methods is not None else list(rows[0].scores)
    for r in rows:
        missing = [m for m in methods if m not in r.scores]
        if missing:
            raise MetricError(f"row {r.id!r} lacks scores for {', '.join(missing)}")
    return ScoreTable(
        ids=tuple(r.id for r in rows),
        labels=[r.label for r in rows],
        scores={m: [r.scores[m] for r in rows] for m in methods},
    )


def write_scores(rows: Iterable[ScoreRow], path: str | Path) -> int:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with p.open("w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_scores(path: str | Path) -> list[ScoreRow]:
    p = Path(path)
    if not p.exists():
        raise DatasetError(f"scores file not found: {p}")
    rows: list[ScoreRow] = []
    with p.open(encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                rows.append(
                    ScoreRow(id=str(raw["id"]), label=raw.get("label"), scores=raw["scores"])
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise DatasetError(f"{p}: bad score row: {e}", line_no=line_no) from e
    return rows
