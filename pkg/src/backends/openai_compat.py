# backends/openai_compat.py
from typing import Optional, Sequence

import httpx
from pydantic import BaseModel, ValidationError

import config
from backends.base import (
    Backend,
    BackendError,
    BackendPayloadError,
    BackendRequest,
    BackendResponse,
    SimilarityJudgment,
    TransientBackendError,
)
from helpers.logging_helper import get_logger
from helpers.retry_helper import retry_sync
from utility.trace_utils import Generation, GenerationRole, TokenEvent

logger = get_logger("backend.openai")

_TRANSPORT_ERRORS = (httpx.TransportError, httpx.TimeoutException)


#
# --- wire models ---
#
class _TokenLogprob(BaseModel):
    token: str
    logprob: float


class _ChoiceLogprobs(BaseModel):
    content: Optional[list[_TokenLogprob]] = None


class _Message(BaseModel):
    content: Optional[str] = None


class _ChatChoice(BaseModel):
    index: int = 0
    message: _Message
    logprobs: Optional[_ChoiceLogprobs] = None


class _Usage(BaseModel):
    prompt_tokens: int = 0
    completion_tokens: int = 0


class _ChatCompletion(BaseModel):
    choices: list[_ChatChoice]
    usage: Optional[_Usage] = None


class _EchoLogprobs(BaseModel):
    tokens: list[str]
    token_logprobs: list[Optional[float]]
    text_offset: list[int]


class _CompletionChoice(BaseModel):
    text: str = ""
    logprobs: Optional[_EchoLogprobs] = None


class _Completion(BaseModel):
    choices: list[_CompletionChoice]


class _SimilarityReply(BaseModel):
    scores: list[float]


def render_completion_prompt(messages: Sequence[tuple[str, str]]) -> str:
    """Flatten chat messages for the legacy completions endpoint."""
    body = "\n\n".join(f"{role}: {text}" for role, text in messages)
    return f"{body}\n\nassistant: "


def _clamp_lp(lp: float) -> float:
    # servers occasionally return tiny positive values from float noise
    return min(float(lp), 0.0)


class OpenAICompatBackend(Backend):
    """Chat-completions client over httpx with logprobs, n-sampling and retries."""

    name = "openai"

    def __init__(
        self,
        cfg: Optional[config.BackendConfig] = None,
        *,
        transport: Optional[httpx.BaseTransport] = None,
        sleep=None,
    ):
        self.cfg = cfg or config.BackendConfig(kind="openai")
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key:
            headers["Authorization"] = f"Bearer {self.cfg.api_key}"
        else:
            logger.warning("API key env %s is not set", self.cfg.api_key_env)
        self._client = httpx.Client(
            base_url=self.cfg.base_url.rstrip("/"),
            headers=headers,
            timeout=self.cfg.timeout,
            transport=transport,
        )
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    #
    # --- transport ---
    #
    def _post_once(self, url: str, payload: dict) -> dict:
        try:
            resp = self._client.post(url, json=payload)
        except _TRANSPORT_ERRORS as exc:
            raise TransientBackendError(f"transport failure: {exc}") from exc

        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code >= 400:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendPayloadError(f"non-JSON response from {url}") from exc

    def _post(self, url: str, payload: dict) -> dict:
        kwargs = {"transient": (TransientBackendError,), "retries": self.cfg.max_retries}
        if self._sleep is not None:
            kwargs["sleep"] = self._sleep
        return retry_sync(lambda: self._post_once(url, payload), **kwargs)

    #
    # --- Backend interface ---
    #
    def generate(self, req: BackendRequest) -> BackendResponse:
        payload = {
            "model": self.cfg.model,
            "messages": [{"role": r, "content": t} for r, t in req.messages],
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "n": req.n,
            "seed": self.cfg.seed,
        }
        if req.want_logprobs:
            payload["logprobs"] = True

        raw = self._post("/chat/completions", payload)
        try:
            parsed = _ChatCompletion.model_validate(raw)
        except ValidationError as exc:
            raise BackendPayloadError(f"malformed chat completion: {exc}") from exc

        role = GenerationRole.GREEDY if req.temperature == 0 else GenerationRole.SAMPLE
        gens = []
        for choice in sorted(parsed.choices, key=lambda c: c.index):
            tokens: tuple[TokenEvent, ...] = ()
            if req.want_logprobs:
                if choice.logprobs is None or choice.logprobs.content is None:
                    raise BackendPayloadError("logprobs requested but missing in response")
                tokens = tuple(
                    TokenEvent(t.token, _clamp_lp(t.logprob)) for t in choice.logprobs.content
                )
            gens.append(Generation(text=choice.message.content or "", tokens=tokens, role=role))

        usage = parsed.usage or _Usage()
        return BackendResponse(
            tuple(gens), usage.prompt_tokens, usage.completion_tokens
        ).check_length(req.n)

    def force_decode(self, messages: Sequence[tuple[str, str]], text: str) -> Generation:
        prompt = render_completion_prompt(messages)
        payload = {
            "model": self.cfg.model,
            "prompt": prompt + text,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
        }
        raw = self._post("/completions", payload)
        try:
            parsed = _Completion.model_validate(raw)
            lp = parsed.choices[0].logprobs
        except (ValidationError, IndexError) as exc:
            raise BackendPayloadError(f"malformed echo completion: {exc}") from exc
        if lp is None:
            raise BackendPayloadError("echo completion returned no logprobs")

        tokens = []
        for tok, logprob, offset in zip(lp.tokens, lp.token_logprobs, lp.text_offset):
            if offset < len(prompt):
                continue
            if logprob is None:
                raise BackendPayloadError("echo completion missing a token logprob")
            tokens.append(TokenEvent(tok, _clamp_lp(logprob)))
        return Generation(text=text, tokens=tuple(tokens), role=GenerationRole.SAMPLE)

    def similarity(self, a: str, b: str) -> SimilarityJudgment:
        if not self.cfg.similarity_url:
            raise BackendError("similarity endpoint not configured (backend.similarity_url)")
        if a == b:
            return SimilarityJudgment(1.0, 1.0)
        raw = self._post(self.cfg.similarity_url, {"pairs": [[a, b], [b, a]]})
        try:
            scores = _SimilarityReply.model_validate(raw).scores
            forward, backward = scores
        except (ValidationError, ValueError) as exc:
            raise BackendPayloadError(f"malformed similarity reply: {exc}") from exc
        return SimilarityJudgment(
            min(max(forward, 0.0), 1.0), min(max(backward, 0.0), 1.0)
        )
