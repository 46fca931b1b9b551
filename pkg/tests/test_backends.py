# tests/test_backends.py
import json

import httpx
import numpy as np
import pytest

import config
from backends.base import (
    BackendError,
    BackendPayloadError,
    BackendRequest,
    JudgeParseError,
    TraceMissError,
    TransientBackendError,
)
from backends.factory import build_backend
from backends.judgments import build_similarity_matrix, judge_correctness, parse_verdict
from backends.mock import MockBackend, tokenize
from backends.openai_compat import OpenAICompatBackend, render_completion_prompt
from backends.replay import ReplayBackend
from utility.trace_utils import GenerationRole, QueryRecord


def _req(**kw):
    base = {"messages": (("user", "What is 2+2?"),)}
    base.update(kw)
    return BackendRequest(**base)


#
# --- requests ---
#
@pytest.mark.parametrize(
    "kw, msg",
    [
        ({"n": 0}, "n must be >= 1"),
        ({"temperature": -1.0}, "temperature"),
        ({"max_tokens": 0}, "max_tokens"),
        ({"purpose": "chat"}, "unknown request purpose"),
    ],
)
def test_request_validation(kw, msg):
    with pytest.raises(ValueError, match=msg):
        _req(**kw)


def test_request_digest_ignores_variables():
    assert _req(variables={"a": 1}).digest() == _req().digest()
    assert _req(n=2).digest() != _req().digest()


#
# --- mock ---
#
def test_mock_is_deterministic():
    a = MockBackend(seed=3).generate(_req(temperature=1.0, n=4))
    b = MockBackend(seed=3).generate(_req(temperature=1.0, n=4))
    assert [g.text for g in a.generations] == [g.text for g in b.generations]
    assert [g.logprobs.tolist() for g in a.generations] == [
        g.logprobs.tolist() for g in b.generations
    ]


def test_mock_force_decode_agrees_with_generate(mock_backend):
    req = _req()
    g = mock_backend.generate(req).first
    assert g.role is GenerationRole.GREEDY
    forced = mock_backend.force_decode(req.messages, g.text)
    np.testing.assert_allclose(forced.logprobs, g.logprobs)
    assert all(-2.05 <= lp <= -0.05 for lp in g.logprobs)


def test_mock_tokens_rebuild_text():
    assert "".join(tokenize("the quick  fox")) == "the quick  fox"


def test_mock_script_cycles_short_lists():
    mb = MockBackend(script={"answer": ["a", "b"]})
    out = mb.generate(_req(n=3, temperature=1.0))
    assert [g.text for g in out.generations] == ["a", "b", "a"]


def test_mock_script_callable_sees_request():
    mb = MockBackend(script={"answer": lambda req: f"n={req.n}"})
    assert mb.generate(_req(n=2)).first.text == "n=2"


def test_mock_similarity_defaults(mock_backend):
    assert mock_backend.similarity("a b", "a b").bidirectional == 1.0
    j = mock_backend.similarity("a b", "a c")
    assert j.entail_forward == pytest.approx(1 / 3)


#
# --- judgments ---
#
@pytest.mark.parametrize(
    "text, label",
    [
        ("CORRECT", 0),
        ("incorrect.", 1),
        ("Grade: Correct", 0),
        ("INCORRECT - wrong city", 1),
        ("NOT CORRECT", 1),
        ("The answer is not correct.", 1),
        ("not  incorrect", 0),
    ],
)
def test_parse_verdict(text, label):
    assert parse_verdict(text) == label


def test_parse_verdict_rejects_other_text():
    with pytest.raises(JudgeParseError, match="unparseable"):
        parse_verdict("maybe")


def test_judge_with_mock(mock_backend):
    q = QueryRecord(id="q", prompt="Capital of France?", ground_truths=("Paris",))
    assert judge_correctness(q, "Paris", mock_backend) == 0
    assert judge_correctness(q, "Lyon", mock_backend) == 1


def test_similarity_matrix_one_call_per_pair():
    mb = MockBackend(similarity_fn=lambda a, b: (0.8, 0.3))
    sim = build_similarity_matrix(["x", "y", "z"], mb)
    assert len(mb.similarity_calls) == 3
    assert sim.forward[0, 1] == 0.8
    assert sim.forward[1, 0] == 0.3
    np.testing.assert_allclose(sim.backward, sim.forward.T)
    np.testing.assert_allclose(np.diag(sim.forward), 1.0)


def test_similarity_matrix_needs_items(mock_backend):
    with pytest.raises(ValueError, match="at least one generation"):
        build_similarity_matrix([], mock_backend)


#
# --- replay ---
#
def test_replay_serves_recordings(tmp_path):
    path = tmp_path / "store.jsonl"
    inner = MockBackend(seed=1)
    with ReplayBackend(path, inner=inner, mode="record") as rec:
        first = rec.generate(_req(temperature=1.0, n=2))
        rec.similarity("a", "b")
        rec.force_decode((("user", "hi"),), "hello there")

    replay = ReplayBackend(path, mode="replay")
    again = replay.generate(_req(temperature=1.0, n=2))
    assert [g.text for g in again.generations] == [g.text for g in first.generations]
    np.testing.assert_allclose(again.first.logprobs, first.first.logprobs)
    assert replay.force_decode((("user", "hi"),), "hello there").text == "hello there"
    # the stored role field is not mistaken for an unknown generation field
    assert dict(again.first.extra) == {}

    with pytest.raises(TraceMissError, match="trace miss"):
        replay.generate(_req(n=3))


def test_replay_auto_records_only_misses(tmp_path):
    inner = MockBackend()
    rb = ReplayBackend(tmp_path / "s.jsonl", inner=inner, mode="auto")
    rb.generate(_req())
    rb.generate(_req())
    assert len(inner.requests) == 1


def test_replay_requires_inner_outside_replay_mode(tmp_path):
    with pytest.raises(ValueError, match="needs an inner backend"):
        ReplayBackend(tmp_path / "s.jsonl", mode="auto")


#
# --- factory ---
#
def test_factory_defaults_to_mock():
    assert isinstance(build_backend(config.RunConfig()), MockBackend)


def test_factory_wraps_replay(tmp_path):
    cfg = config.RunConfig.model_validate(
        {"replay": {"mode": "auto", "path": str(tmp_path / "r.jsonl")}}
    )
    assert isinstance(build_backend(cfg), ReplayBackend)


def test_factory_replay_needs_path():
    cfg = config.RunConfig.model_validate({"replay": {"mode": "replay"}})
    with pytest.raises(config.ConfigError, match="needs replay.path"):
        build_backend(cfg)


#
# --- openai-compatible client ---
#
def _openai(handler, monkeypatch, **cfg):
    monkeypatch.setenv("UE_TEST_KEY", "sk-test")
    settings = config.BackendConfig(
        kind="openai",
        base_url="https://llm.example.test/v1",
        api_key_env="UE_TEST_KEY",
        max_retries=2,
        **cfg,
    )
    return OpenAICompatBackend(
        settings, transport=httpx.MockTransport(handler), sleep=lambda s: None
    )


def _chat_reply(text="Paris", lp=-0.25):
    return {
        "choices": [
            {
                "index": 0,
                "message": {"content": text},
                "logprobs": {"content": [{"token": text, "logprob": lp}]},
            }
        ],
        "usage": {"prompt_tokens": 5, "completion_tokens": 1},
    }


def test_openai_generate_parses_logprobs(monkeypatch):
    seen = {}

    def handler(request):
        seen["path"] = request.url.path
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json=_chat_reply(lp=1e-9))

    backend = _openai(handler, monkeypatch)
    resp = backend.generate(_req())
    assert seen["path"] == "/v1/chat/completions"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"]["logprobs"] is True
    assert resp.first.text == "Paris"
    assert resp.first.logprobs.tolist() == [0.0]
    assert resp.completion_tokens == 1


def test_openai_retries_transient_status(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) == 1:
            return httpx.Response(503, text="busy")
        return httpx.Response(200, json=_chat_reply())

    assert _openai(handler, monkeypatch).generate(_req()).first.text == "Paris"
    assert len(calls) == 2


def test_openai_gives_up_after_retries(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(429, text="slow down")

    with pytest.raises(TransientBackendError, match="HTTP 429"):
        _openai(handler, monkeypatch).generate(_req())
    assert len(calls) == 2


def test_openai_client_error_is_not_retried(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, text="bad request")

    with pytest.raises(BackendError, match="HTTP 400"):
        _openai(handler, monkeypatch).generate(_req())
    assert len(calls) == 1


def test_openai_missing_logprobs_is_payload_error(monkeypatch):
    reply = _chat_reply()
    reply["choices"][0]["logprobs"] = None
    backend = _openai(lambda r: httpx.Response(200, json=reply), monkeypatch)
    with pytest.raises(BackendPayloadError, match="logprobs requested"):
        backend.generate(_req())


def test_openai_force_decode_keeps_answer_tokens(monkeypatch):
    messages = (("user", "hi"),)
    prompt = render_completion_prompt(messages)

    def handler(request):
        body = json.loads(request.content)
        assert body["echo"] is True and body["prompt"] == prompt + "hello"
        return httpx.Response(
            200,
            json={
                "choices": [
                    {
                        "text": "",
                        "logprobs": {
                            "tokens": ["user", "hello"],
                            "token_logprobs": [None, -0.5],
                            "text_offset": [0, len(prompt)],
                        },
                    }
                ]
            },
        )

    g = _openai(handler, monkeypatch).force_decode(messages, "hello")
    assert [t.token_text for t in g.tokens] == ["hello"]
    assert g.logprobs.tolist() == [-0.5]


def test_openai_similarity(monkeypatch):
    def handler(request):
        assert request.url.path == "/v1/nli"
        return httpx.Response(200, json={"scores": [0.9, 1.2]})

    backend = _openai(handler, monkeypatch, similarity_url="/nli")
    j = backend.similarity("a", "b")
    assert (j.entail_forward, j.entail_backward) == (0.9, 1.0)
    assert backend.similarity("same", "same").bidirectional == 1.0


def test_openai_similarity_needs_endpoint(monkeypatch):
    backend = _openai(lambda r: httpx.Response(200, json={}), monkeypatch)
    with pytest.raises(BackendError, match="similarity endpoint not configured"):
        backend.similarity("a", "b")
