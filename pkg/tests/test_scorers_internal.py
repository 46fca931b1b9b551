# tests/test_scorers_internal.py
import math

import numpy as np
import pytest

from scorers.base import ScorerInputError
from scorers.internal import HiddenMatrix, attention_score, inside_eigenscore


def test_eigenscore_of_identical_states():
    h = HiddenMatrix(Z=np.array([[1.0, 1.0], [-1.0, -1.0]]))
    expected = (math.log(0.001) + math.log(4.001)) / 2
    assert inside_eigenscore(h) == pytest.approx(expected)


def test_diverse_states_score_higher():
    same = HiddenMatrix(Z=np.array([[1.0, 1.0], [-1.0, -1.0], [0.0, 0.0], [0.0, 0.0]]))
    diverse = HiddenMatrix(Z=np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]))
    assert inside_eigenscore(diverse) == pytest.approx(math.log(2.001))
    assert inside_eigenscore(diverse) > inside_eigenscore(same)


def test_hidden_matrix_validation():
    with pytest.raises(ValueError, match="d x B"):
        HiddenMatrix(Z=np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="alpha"):
        HiddenMatrix(Z=np.ones((2, 2)), alpha=0.0)


def test_from_trace_needs_equal_dimensions(make_trace, make_gen):
    t = make_trace()
    t = type(t)(
        query=t.query,
        greedy=t.greedy,
        samples=(make_gen("a", hidden_state=(1.0, 2.0)), make_gen("b", hidden_state=(1.0,))),
    )
    with pytest.raises(ScorerInputError, match="mixed dimensions"):
        HiddenMatrix.from_trace(t)


def test_from_trace_falls_back_to_greedy(make_trace, make_gen):
    t = make_trace()
    t = type(t)(query=t.query, greedy=make_gen("a", hidden_state=(1.0, 2.0, 3.0)))
    assert HiddenMatrix.from_trace(t).Z.shape == (3, 1)


def test_attention_score(make_gen):
    g = make_gen("a b", attention_diagonals=((0.5, 0.25),))
    assert attention_score(g) == pytest.approx(math.log(8))
    assert attention_score(g, sign=-1) == pytest.approx(-math.log(8))


def test_attention_needs_positive_entries(make_gen):
    with pytest.raises(ScorerInputError, match="> 0"):
        attention_score(make_gen("a", attention_diagonals=((0.5, 0.0),)))
    with pytest.raises(ScorerInputError, match="required"):
        attention_score(make_gen("a"))


def test_eigenscore_of_zero_states_is_log_alpha():
    h = HiddenMatrix(Z=np.zeros((4, 3)), alpha=0.001)
    assert inside_eigenscore(h) == pytest.approx(math.log(0.001), abs=1e-6)
    assert inside_eigenscore(h) == pytest.approx(-6.9078, abs=1e-4)


def test_eigenscore_single_column():
    # centered [-2, -1, 0, 3] has squared norm 14
    h = HiddenMatrix(Z=np.array([[1.0], [2.0], [3.0], [6.0]]))
    assert inside_eigenscore(h) == pytest.approx(math.log(14.001))


def test_eigenscore_ignores_column_order():
    rng = np.random.default_rng(3)
    Z = rng.normal(size=(6, 5))
    perm = [3, 0, 4, 1, 2]
    assert inside_eigenscore(HiddenMatrix(Z=Z[:, perm])) == pytest.approx(
        inside_eigenscore(HiddenMatrix(Z=Z)), abs=1e-10
    )


@pytest.mark.parametrize("seed", range(20))
def test_centered_gram_is_psd(seed):
    rng = np.random.default_rng(seed)
    d, b = int(rng.integers(1, 6)), int(rng.integers(1, 7))
    Z = rng.normal(size=(d, b))
    J = np.eye(d) - np.ones((d, d)) / d
    assert np.linalg.eigvalsh(Z.T @ J @ Z).min() >= -1e-10
    assert inside_eigenscore(HiddenMatrix(Z=Z)) >= math.log(0.001) - 1e-12


def test_eigenscore_clips_rank_deficient_gram():
    # two features leave a rank-one gram: four eigenvalues vanish, the fifth is its trace
    Z = np.array([[1.0, 2.0, -1.0, 0.5, 3.0], [0.0, -2.0, 1.0, 1.5, -1.0]])
    centered = Z - Z.mean(axis=0, keepdims=True)
    total = float((centered**2).sum())
    expected = (4 * math.log(0.001) + math.log(total + 0.001)) / 5
    score = inside_eigenscore(HiddenMatrix(Z=Z))
    assert math.isfinite(score)
    assert score == pytest.approx(expected, abs=1e-9)


def test_attention_score_of_exponential_diagonal(make_gen):
    g = make_gen("a b", attention_diagonals=((math.exp(-1), math.exp(-2)),))
    assert attention_score(g) == pytest.approx(3.0)
    assert attention_score(make_gen("a", attention_diagonals=((1.0, 1.0),))) == 0.0


def test_attention_score_adds_over_heads(make_gen):
    head_a = (0.5, 0.25)
    head_b = (0.1, 0.9, 0.3)
    both = attention_score(make_gen("x", attention_diagonals=(head_a, head_b)))
    alone = attention_score(make_gen("x", attention_diagonals=(head_a,))) + attention_score(
        make_gen("x", attention_diagonals=(head_b,))
    )
    assert both == pytest.approx(alone)
