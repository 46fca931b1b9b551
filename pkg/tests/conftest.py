# tests/conftest.py
import pytest

from backends.mock import MockBackend
from data.dataset import save_dataset
from utility.trace_utils import (
    Generation,
    GenerationRole,
    GenerationTrace,
    LabeledDataset,
    LabeledTrace,
    QueryRecord,
    TokenEvent,
)


@pytest.fixture(autouse=True)
def _no_log_file(monkeypatch):
    # keep test runs from writing logs/ue.log
    monkeypatch.setenv("LOG_FILE", "")
    monkeypatch.delenv("HTTP_LOG_FILE", raising=False)


@pytest.fixture
def mock_backend():
    return MockBackend(seed=0)


@pytest.fixture
def make_gen():
    def _make(text="an answer", logprobs=(-0.5,), role=GenerationRole.SAMPLE, **kw):
        words = text.split() or [text]
        tokens = tuple(
            TokenEvent(token_text=(" " if i else "") + words[i % len(words)], logprob=lp)
            for i, lp in enumerate(logprobs)
        )
        return Generation(text=text, tokens=tokens, role=role, **kw)

    return _make


@pytest.fixture
def make_trace(make_gen):
    def _make(
        qid="q1",
        prompt="What is the capital of France?",
        greedy=("Paris", (-0.1,)),
        samples=(),
        ground_truths=("Paris",),
        dataset_tag="trivia",
        **kw,
    ):
        query = QueryRecord(
            id=qid, prompt=prompt, ground_truths=ground_truths, dataset_tag=dataset_tag
        )
        g = make_gen(greedy[0], greedy[1], role=GenerationRole.GREEDY)
        s = tuple(make_gen(text, lps) for text, lps in samples)
        return GenerationTrace(query=query, greedy=g, samples=s, **kw)

    return _make


@pytest.fixture
def tiny_dataset(make_trace):
    """Four labeled traces with samples; greedy logprobs grow less likely with the id."""
    entries = []
    for i, label in enumerate((0, 0, 1, 1)):
        lp = -0.2 * (i + 1)
        t = make_trace(
            qid=f"q{i}",
            prompt=f"Question number {i}?",
            greedy=(f"answer {i}", (lp, lp)),
            samples=(
                (f"answer {i}", (lp,)),
                (f"other {i}", (lp - 0.5,)),
                (f"answer {i}", (lp - 0.1,)),
            ),
            ground_truths=(f"answer {i}",),
        )
        entries.append(LabeledTrace(trace=t, label=label))
    return LabeledDataset(tuple(entries))


@pytest.fixture
def dataset_file(tmp_path, tiny_dataset):
    path = tmp_path / "data.jsonl"
    save_dataset(tiny_dataset, path)
    return path
