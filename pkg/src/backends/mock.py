# backends/mock.py
import hashlib
import json
import random
import re
import threading
from typing import Any, Callable, Mapping, Optional, Sequence

from backends.base import (
    Backend,
    BackendRequest,
    BackendResponse,
    SimilarityJudgment,
)
from helpers.logging_helper import get_logger
from utility.trace_utils import Generation, GenerationRole, TokenEvent

logger = get_logger("backend.mock")

_TOKEN_RE = re.compile(r"\s*\S+")
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")

CANNED_ANSWERS = ("mock answer 0", "mock answer 1", "mock answer 2")
QUESTION_PREFIX = "What is known about: "

# a script entry maps a request to reply text(s) or ready-made generations
ScriptEntry = Callable[[BackendRequest], Any] | str | Sequence[Any] | Generation


def tokenize(text: str) -> list[str]:
    """Whitespace-attached tokens; "".join(tokenize(t)) == t for stripped t."""
    return _TOKEN_RE.findall(text)


def jaccard(a: str, b: str) -> float:
    ta, tb = set(a.casefold().split()), set(b.casefold().split())
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


class MockBackend(Backend):
    """
    Deterministic backend: every reply and logprob is a pure function of
    (request, seed). Token logprobs depend only on (seed, messages, text, token index),
    so generate() and force_decode() agree on identical text.
    """

    name = "mock"

    def __init__(
        self,
        seed: int = 0,
        script: Optional[Mapping[str, ScriptEntry]] = None,
        similarity_fn: Optional[Callable[[str, str], tuple[float, float]]] = None,
    ):
        self.seed = seed
        self.script = dict(script or {})
        self.similarity_fn = similarity_fn
        self.requests: list[BackendRequest] = []
        self.similarity_calls: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    #
    # --- logprobs ---
    #
    def _logprob(self, messages_key: str, text: str, index: int) -> float:
        h = hashlib.sha256(f"{self.seed}|{messages_key}|{text}|{index}".encode("utf-8"))
        u = int.from_bytes(h.digest()[:8], "big") / 2**64
        return -(0.05 + 2.0 * u)

    def make_generation(
        self,
        messages: Sequence[tuple[str, str]],
        text: str,
        role: GenerationRole = GenerationRole.SAMPLE,
    ) -> Generation:
        key = json.dumps([list(m) for m in messages], ensure_ascii=False)
        tokens = tuple(
            TokenEvent(token_text=tok, logprob=self._logprob(key, text, i))
            for i, tok in enumerate(tokenize(text))
        )
        return Generation(text=text, tokens=tokens, role=role)

    #
    # --- default replies per purpose ---
    #
    def _rng(self, req: BackendRequest, index: int) -> random.Random:
        return random.Random(f"{self.seed}|{req.digest()}|{index}")

    def _default_texts(self, req: BackendRequest) -> list[str]:
        v = req.variables
        p = req.purpose

        if p == "judge":
            answer = str(v.get("answer", "")).strip().casefold()
            truths = [str(g).strip().casefold() for g in v.get("ground_truths_list", ())]
            return ["CORRECT" if answer and answer in truths else "INCORRECT"] * req.n
        if p == "p_true":
            return ["The generated answer is true"] * req.n
        if p == "verbalized":
            return [str(self._rng(req, i).randint(0, 100)) for i in range(req.n)]
        if p == "paraphrase":
            q = str(v.get("question", ""))
            return [f"Rephrased: {q}" for _ in range(req.n)]
        if p == "decompose":
            parts = [s.strip() for s in _SENTENCE_RE.split(str(v.get("text", ""))) if s.strip()]
            return [repr(parts)] * req.n
        if p == "decompose_claim":
            text = str(v.get("text", "")).strip()
            return [repr([text] if text else [])] * req.n
        if p == "question":
            return [f"{QUESTION_PREFIX}{v.get('claim', '')}"] * req.n
        if p == "claim_answer":
            q = str(v.get("question", ""))
            if q.startswith(QUESTION_PREFIX):
                return [q[len(QUESTION_PREFIX):]] * req.n
            return [CANNED_ANSWERS[0]] * req.n
        if p == "prompt_tune":
            return [f"Candidate prompt {v.get('iteration', 0)}"] * req.n

        # plain answers
        if req.temperature == 0:
            return [CANNED_ANSWERS[0]] * req.n
        return [
            CANNED_ANSWERS[self._rng(req, i).randrange(len(CANNED_ANSWERS))]
            for i in range(req.n)
        ]

    def _scripted(self, req: BackendRequest) -> Optional[list[Any]]:
        if req.purpose not in self.script:
            return None
        entry = self.script[req.purpose]
        out = entry(req) if callable(entry) else entry
        if isinstance(out, (str, Generation)):
            return [out] * req.n
        out = list(out)
        if len(out) != req.n:
            # cycle short scripts
            out = [out[i % len(out)] for i in range(req.n)]
        return out

    #
    # --- Backend interface ---
    #
    def generate(self, req: BackendRequest) -> BackendResponse:
        with self._lock:
            self.requests.append(req)

        replies = self._scripted(req)
        if replies is None:
            replies = self._default_texts(req)

        role = GenerationRole.GREEDY if req.temperature == 0 else GenerationRole.SAMPLE
        gens = []
        for r in replies:
            if isinstance(r, Generation):
                gens.append(r)
            else:
                gens.append(self.make_generation(req.messages, str(r), role))
        logger.debug("mock generate purpose=%s n=%d", req.purpose, req.n)
        completion = sum(len(g.tokens) for g in gens)
        prompt = sum(len(tokenize(t)) for _, t in req.messages)
        return BackendResponse(tuple(gens), prompt, completion).check_length(req.n)

    def similarity(self, a: str, b: str) -> SimilarityJudgment:
        with self._lock:
            self.similarity_calls.append((a, b))
        if self.similarity_fn is not None:
            f, bk = self.similarity_fn(a, b)
            return SimilarityJudgment(float(f), float(bk))
        if a == b:
            return SimilarityJudgment(1.0, 1.0)
        j = jaccard(a, b)
        return SimilarityJudgment(j, j)

    def force_decode(self, messages: Sequence[tuple[str, str]], text: str) -> Generation:
        return self.make_generation(tuple(messages), text, GenerationRole.SAMPLE)
