# backends/judgments.py
import re
from typing import Mapping, Optional, Sequence

import numpy as np

from backends.base import Backend, BackendRequest, JudgeParseError
from helpers.logging_helper import get_logger
from loader import PromptTemplate, get_templates
from utility.trace_utils import QueryRecord, SimilarityKind, SimilarityMatrix

logger = get_logger("backend.judgments")

_VERDICT_RE = re.compile(r"\b(NOT\s+)?(INCORRECT|CORRECT)\b")


def build_similarity_matrix(
    gens: Sequence[str],
    backend: Backend,
    kind: SimilarityKind = SimilarityKind.NLI_ENTAILMENT,
) -> SimilarityMatrix:
    """
    One backend call per unordered pair (i < j); its forward/backward judgments fill
    both directions, so backward == forward.T. Any backend error aborts the whole matrix.
    """
    m = len(gens)
    if m < 1:
        raise ValueError("need at least one generation to build a similarity matrix.")

    forward = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            judgment = backend.similarity(gens[i], gens[j])
            forward[i, j] = judgment.entail_forward
            forward[j, i] = judgment.entail_backward

    return SimilarityMatrix(forward=forward, backward=forward.T.copy(), kind=kind)


def parse_verdict(text: str) -> int:
    """CORRECT -> 0, INCORRECT -> 1; a leading NOT flips the verdict.

    Anything else raises JudgeParseError.
    """
    match = _VERDICT_RE.search(text.upper())
    if not match:
        raise JudgeParseError(f"unparseable judge output: {text!r}")
    negated, verdict = match.group(1), match.group(2)
    return int((verdict == "INCORRECT") != bool(negated))


def judge_correctness(
    q: QueryRecord,
    answer: str,
    backend: Backend,
    prompts: Optional[Mapping[str, PromptTemplate]] = None,
) -> int:
    prompts = prompts or get_templates()
    variables = {
        "question": q.prompt,
        "ground_truths": "; ".join(q.ground_truths) or "(none given)",
        "answer": answer,
    }
    req = BackendRequest(
        messages=tuple(prompts["judge"].render(**variables)),
        max_tokens=8,
        temperature=0.0,
        n=1,
        want_logprobs=False,
        purpose="judge",
        variables={**variables, "ground_truths_list": list(q.ground_truths)},
    )
    verdict = backend.generate(req).first.text
    label = parse_verdict(verdict)
    logger.debug("judge %s -> %s (%r)", q.id, label, verdict)
    return label
