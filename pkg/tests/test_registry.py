# tests/test_registry.py
import pytest

import config
from backends.mock import MockBackend
from scorers.base import ScorerContext, ScorerInputError
from scorers.registry import METHODS, get_method, resolve_methods, score_trace, unsupervised


def test_roster_order():
    assert list(METHODS) == list(config.ALL_METHODS)
    assert len(METHODS) == 19


@pytest.mark.parametrize(
    "name, expected",
    [
        ("P(true)", "p_true"),
        ("SemanticEntropy", "semantic_entropy"),
        ("semantic-entropy", "semantic_entropy"),
        ("ln", "lns"),
        ("Eccentricity_C", "eccentricity_c"),
    ],
)
def test_aliases(name, expected):
    assert get_method(name).id == expected


def test_unknown_method():
    with pytest.raises(ValueError, match="unknown method id"):
        get_method("perplexity_plus")


def test_resolve_and_unsupervised():
    assert resolve_methods(["LNS", "lns", "KLE"]) == ["lns", "kle"]
    assert unsupervised(["lars", "lns", "saplma", "kle"]) == ["lns", "kle"]


def test_score_trace(tiny_dataset):
    t = tiny_dataset.entries[0].trace
    ctx = ScorerContext(backend=MockBackend())
    scores = score_trace(t, ["lns", "entropy", "degmat", "kle"], ctx)
    assert list(scores) == ["lns", "entropy", "degmat", "kle"]
    assert scores["lns"].value == pytest.approx(0.2)
    assert 0.0 <= scores["degmat"].value <= 1.0
    assert all(s.method == m for m, s in scores.items())


def test_score_trace_reports_gaps(make_trace):
    t = make_trace(qid="bare")
    ctx = ScorerContext(backend=MockBackend())
    with pytest.raises(ScorerInputError, match="trace 'bare': samples required"):
        score_trace(t, ["degmat"], ctx)


def test_backend_needed_for_consistency(tiny_dataset):
    t = tiny_dataset.entries[0].trace
    with pytest.raises(ScorerInputError, match="backend is required"):
        score_trace(t, ["degmat"], ScorerContext())


def test_similarity_matrix_is_cached(tiny_dataset):
    t = tiny_dataset.entries[0].trace
    mb = MockBackend()
    ctx = ScorerContext(backend=mb)
    first = ctx.full_matrix(t)
    calls = len(mb.similarity_calls)
    assert calls > 0
    assert ctx.full_matrix(t) is first
    score_trace(t, ["degmat", "sum_eigv", "eccentricity_c"], ctx)
    assert len(mb.similarity_calls) == calls


def test_similarity_cache_keys_on_texts_not_ids(make_trace):
    ctx = ScorerContext(backend=MockBackend())
    first = make_trace(qid="q1", samples=(("Paris", (-0.1,)), ("Lyon", (-0.2,)), ("Nice", (-0.3,))))
    second = make_trace(qid="q1", samples=(("Paris", (-0.1,)), ("Paris France", (-0.2,)), ("Nice", (-0.3,))))
    assert ctx.full_matrix(first) is not ctx.full_matrix(second)

    shared = score_trace(second, ["degmat", "kle", "eccentricity"], ctx)
    fresh = score_trace(second, ["degmat", "kle", "eccentricity"], ScorerContext(backend=MockBackend()))
    assert shared == fresh


def test_similarity_cache_is_bounded(make_trace):
    mb = MockBackend()
    ctx = ScorerContext(backend=mb, cache_size=2)
    traces = [
        make_trace(qid="q", greedy=(f"answer {i}", (-0.1,)), samples=(("Paris", (-0.1,)),))
        for i in range(3)
    ]
    for t in traces:
        ctx.full_matrix(t)
    assert ctx.cached_matrices == 2

    calls = len(mb.similarity_calls)
    ctx.full_matrix(traces[0])
    assert len(mb.similarity_calls) > calls

    ctx.clear_cache()
    assert ctx.cached_matrices == 0
    with pytest.raises(ValueError, match="cache_size"):
        ScorerContext(cache_size=0)
