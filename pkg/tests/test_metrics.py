# tests/test_metrics.py
import numpy as np
import pytest

from evaluation.metrics import (
    MetricError,
    RecallTargetSet,
    ScoredDataset,
    ScoreTable,
    are,
    auroc,
    prr,
    recall_at,
    rejection_curve,
    shift_study,
    threshold_at_recall,
    thresholds_at_recall,
)


def _ds(pairs):
    return ScoredDataset(tuple(pairs))


def _brute_prr(scores, labels):
    """Exhaustive rejection curve for distinct scores."""
    n = len(labels)
    order = np.argsort(-np.asarray(scores))

    def area(rank):
        kept_correct = [(np.asarray(labels)[rank[r:]] == 0).mean() for r in range(n)]
        prec = kept_correct + [kept_correct[-1]]
        return sum((prec[r] + prec[r + 1]) / 2 for r in range(n)) / n

    oracle = np.argsort(-np.asarray(labels), kind="stable")
    rand = float((np.asarray(labels) == 0).mean())
    return (area(order) - rand) / (area(oracle) - rand)


#
# --- AUROC / PRR ---
#
def test_auroc_counts_pairs():
    # every incorrect answer outranks every correct one
    assert auroc(_ds([(0.1, 0), (0.9, 1), (0.5, 1), (0.4, 0)])) == pytest.approx(1.0)
    # one discordant pair out of four
    assert auroc(_ds([(0.1, 0), (0.9, 1), (0.3, 1), (0.4, 0)])) == pytest.approx(0.75)


def test_auroc_ties_count_half():
    assert auroc(_ds([(1.0, 0), (1.0, 1), (1.0, 0), (1.0, 1)])) == pytest.approx(0.5)


@pytest.mark.parametrize("metric", [auroc, prr])
def test_single_class_is_an_error(metric):
    with pytest.raises(MetricError, match="only label 0"):
        metric(_ds([(0.1, 0), (0.2, 0)]))


def test_prr_oracle_is_exactly_one():
    assert prr(_ds([(1, 1), (2, 1), (0.5, 0), (0.1, 0)])) == 1.0


def test_prr_hand_fixture():
    # curve areas 35/48 (scores), 41/48 (oracle), 1/2 (random)
    d = _ds([(4, 1), (3, 0), (2, 1), (1, 0)])
    assert prr(d) == pytest.approx(11 / 17)
    assert prr(d) == pytest.approx(_brute_prr(d.scores, d.labels))


def test_prr_matches_enumeration_on_random_fixtures():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(4, 12))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        scores = rng.permutation(n).astype(float)
        assert prr(ScoredDataset.from_arrays(scores, labels)) == pytest.approx(
            _brute_prr(scores, labels)
        )


def test_prr_reversed_ordering_is_negative():
    assert prr(_ds([(1, 0), (2, 0), (0.5, 1), (0.1, 1)])) < 0


def test_prr_all_tied_is_random():
    assert prr(_ds([(0.3, 0), (0.3, 1), (0.3, 0), (0.3, 1)])) == pytest.approx(0.0)


def test_prr_random_scores_near_zero():
    values = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 2, 1000)
        values.append(prr(ScoredDataset.from_arrays(rng.random(1000), labels)))
    assert abs(np.mean(values)) <= 0.05


def test_prr_all_correct_oracle_rejected():
    with pytest.raises(MetricError):
        prr(_ds([(0.1, 0), (0.2, 0)]))


@pytest.mark.parametrize(
    "transform", [np.exp, lambda s: 3.0 * s + 1.0, lambda s: s**3], ids=["exp", "affine", "cube"]
)
def test_metrics_invariant_under_monotone_maps(transform):
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 2, 200)
    scores = rng.normal(size=200) + labels
    base = ScoredDataset.from_arrays(scores, labels)
    moved = ScoredDataset.from_arrays(transform(scores), labels)
    assert auroc(moved) == pytest.approx(auroc(base), abs=1e-9)
    assert prr(moved) == pytest.approx(prr(base), abs=1e-9)


def test_rejection_curve_shape():
    x, y = rejection_curve(_ds([(4, 1), (3, 0), (2, 1), (1, 0)]))
    assert x.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert y.tolist() == pytest.approx([0.5, 2 / 3, 0.5, 1.0, 1.0])


def test_scored_dataset_validation():
    with pytest.raises(ValueError, match="labels must be 0 or 1"):
        _ds([(0.1, 2)])
    with pytest.raises(ValueError, match="NaN"):
        _ds([(float("nan"), 1)])
    with pytest.raises(ValueError, match="2 scores but 1 labels"):
        ScoredDataset.from_arrays([0.1, 0.2], [1])


#
# --- thresholds ---
#
@pytest.fixture
def three_positives():
    return _ds([(1, 1), (2, 1), (3, 1)])


def test_threshold_at_zero_recall_is_above_max(three_positives):
    t = threshold_at_recall(three_positives, 0.0)
    assert t > 3
    assert recall_at(three_positives.positives, t)[0] == 0.0


def test_threshold_at_full_recall_is_below_min(three_positives):
    t = threshold_at_recall(three_positives, 1.0)
    assert t < 1
    assert recall_at(three_positives.positives, t)[0] == 1.0


def test_threshold_picks_nearest_recall(three_positives):
    t = threshold_at_recall(three_positives, 0.67)
    assert 1 < t < 2
    assert recall_at(three_positives.positives, t)[0] == pytest.approx(2 / 3)


def test_random_threshold_stays_in_interval(three_positives):
    rng = np.random.default_rng(0)
    for _ in range(50):
        t = threshold_at_recall(three_positives, 0.67, mode="random", rng=rng)
        assert 1 <= t < 2


def test_thresholds_are_monotone():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 2, 100)
    labels[0] = 1
    d = ScoredDataset.from_arrays(rng.normal(size=100), labels)
    t = thresholds_at_recall(d, RecallTargetSet().as_array())
    assert np.all(np.diff(t) <= 0)


def test_threshold_needs_positives():
    with pytest.raises(MetricError, match="no positives"):
        threshold_at_recall(_ds([(0.1, 0)]), 0.5)


def test_recall_targets_validated():
    with pytest.raises(ValueError, match="sorted"):
        RecallTargetSet((0.5, 0.1))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        RecallTargetSet((1.5,))
    assert len(RecallTargetSet().targets) == 1001


#
# --- ARE ---
#
@pytest.fixture
def cal_set():
    return _ds([(1, 1), (2, 1), (3, 1), (0.5, 0)])


def test_are_self_calibration(cal_set):
    value = are(cal_set, cal_set)
    assert 0 <= value <= 1 / 3


def test_are_exact_when_targets_achievable(cal_set):
    targets = RecallTargetSet((0.0, 1 / 3, 2 / 3, 1.0))
    assert are(cal_set, cal_set, targets) == pytest.approx(0.0)


def test_are_zero_target(cal_set):
    assert are(cal_set, cal_set, RecallTargetSet((0.0,))) == 0.0


def test_are_disjoint_shift_is_large(cal_set):
    shifted = _ds([(s + 10, l) for s, l in cal_set.pairs])
    # every test positive clears every cal threshold below 10
    value = are(cal_set, shifted)
    assert value >= 0.4
    assert value <= 1.0


#
# --- tables and shift study ---
#
def _table(n, seed, shift=0.0, methods=("a", "b")):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    scores = {m: rng.normal(size=n) + labels + shift for m in methods}
    return ScoreTable(ids=tuple(f"x{i}" for i in range(n)), labels=labels, scores=scores)


def test_table_split_is_disjoint():
    t = _table(20, 0)
    cal, rest = t.split(8, np.random.default_rng(0))
    assert len(cal) == 8 and len(rest) == 12
    assert not set(cal.ids) & set(rest.ids)


def test_table_rejects_misaligned_columns():
    with pytest.raises(ValueError, match="3 scores for 2 rows"):
        ScoreTable(ids=("a", "b"), labels=[0, 1], scores={"m": [1.0, 2.0, 3.0]})


def test_table_unknown_method():
    with pytest.raises(MetricError, match="no scores for method 'zzz'"):
        _table(4, 0).dataset("zzz")


def test_shift_study_rows():
    test = _table(400, 1)
    rows = shift_study(
        ["a", "b"],
        {"in_domain": test, "shifted": _table(400, 2, shift=1.0)},
        test,
        seeds=(0, 1, 2),
    )
    assert [(r.method, r.cal_set) for r in rows] == [
        ("a", "in_domain"),
        ("b", "in_domain"),
        ("a", "shifted"),
        ("b", "shifted"),
    ]
    assert all(r.metric == "are" and r.seed_count == 3 for r in rows)
    by_key = {(r.method, r.cal_set): r.mean for r in rows}
    for m in ("a", "b"):
        assert by_key[(m, "in_domain")] < 0.1
        assert by_key[(m, "shifted")] > by_key[(m, "in_domain")]


def test_shift_study_without_methods_is_empty():
    test = _table(20, 0)
    assert shift_study([], {"in_domain": test}, test) == []
