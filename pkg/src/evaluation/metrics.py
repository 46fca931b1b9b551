# evaluation/metrics.py
"""Threshold-free metrics (AUROC, PRR) and recall calibration under distribution shift."""
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from sklearn.metrics import roc_auc_score

from helpers.logging_helper import get_logger
from utility.report_utils import ReportRow

logger = get_logger("evaluation.metrics")

ThresholdMode = Literal["midpoint", "random"]


class MetricError(ValueError):
    """Evaluation input is single-class, empty or otherwise degenerate."""


@dataclass(frozen=True, slots=True)
class ScoredDataset:
    """(score, label) pairs; label 1 marks an incorrect answer."""

    pairs: tuple[tuple[float, int], ...]

    def __post_init__(self):
        clean = []
        for score, label in self.pairs:
            score = float(score)
            if math.isnan(score):
                raise ValueError("scores must not be NaN.")
            if label not in (0, 1):
                raise ValueError(f"labels must be 0 or 1, got {label!r}.")
            clean.append((score, int(label)))
        object.__setattr__(self, "pairs", tuple(clean))

    @classmethod
    def from_arrays(cls, scores: Iterable[float], labels: Iterable[int]) -> "ScoredDataset":
        scores, labels = list(scores), list(labels)
        if len(scores) != len(labels):
            raise ValueError(f"{len(scores)} scores but {len(labels)} labels.")
        return cls(tuple(zip(scores, (int(l) for l in labels))))

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for s, _ in self.pairs], dtype=float)

    @property
    def labels(self) -> np.ndarray:
        return np.array([l for _, l in self.pairs], dtype=int)

    @property
    def positives(self) -> np.ndarray:
        """Scores of label-1 items, ascending."""
        return np.sort(np.array([s for s, l in self.pairs if l == 1], dtype=float))

    def check_both_classes(self) -> None:
        labels = self.labels
        if labels.size == 0:
            raise MetricError("empty dataset")
        if labels.min() == labels.max():
            raise MetricError(f"only label {labels[0]} present in {labels.size} items")


def _default_targets() -> tuple[float, ...]:
    return tuple(round(i * 0.001, 3) for i in range(1001))


@dataclass(frozen=True, slots=True)
class RecallTargetSet:
    targets: tuple[float, ...] = field(default_factory=_default_targets)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if not self.targets:
            raise ValueError("at least one recall target is required.")
        if any(t < 0 or t > 1 for t in self.targets):
            raise ValueError("recall targets must lie in [0, 1].")
        if any(a > b for a, b in zip(self.targets, self.targets[1:])):
            raise ValueError("recall targets must be sorted.")

    def as_array(self) -> np.ndarray:
        return np.array(self.targets, dtype=float)


@dataclass(frozen=True)
class ScoreTable:
    """Per-method scores for one labeled dataset, rows aligned across methods."""

    ids: tuple[str, ...]
    labels: np.ndarray
    scores: Mapping[str, np.ndarray]

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.shape != (len(self.ids),):
            raise ValueError(f"{len(self.ids)} ids but labels shaped {labels.shape}.")
        cols = {}
        for method, values in self.scores.items():
            arr = np.asarray(values, dtype=float)
            if arr.shape != labels.shape:
                raise ValueError(f"{method}: {arr.size} scores for {labels.size} rows.")
            arr.setflags(write=False)
            cols[method] = arr
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", cols)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def methods(self) -> list[str]:
        return list(self.scores)

    def dataset(self, method: str) -> ScoredDataset:
        if method not in self.scores:
            raise MetricError(f"no scores for method {method!r}")
        return ScoredDataset.from_arrays(self.scores[method], self.labels)

    def subset(self, indices: Sequence[int]) -> "ScoreTable":
        idx = np.asarray(indices, dtype=int)
        return ScoreTable(
            ids=tuple(self.ids[i] for i in idx),
            labels=self.labels[idx],
            scores={m: v[idx] for m, v in self.scores.items()},
        )

    def sample(self, size: Optional[int], rng: np.random.Generator) -> "ScoreTable":
        if size is None or size >= len(self):
            return self
        return self.subset(np.sort(rng.choice(len(self), size=size, replace=False)))

    def split(self, cal_size: int, rng: np.random.Generator) -> tuple["ScoreTable", "ScoreTable"]:
        """Disjoint seeded (calibration, remainder) split."""
        if not 0 < cal_size < len(self):
            raise MetricError(f"cal_size {cal_size} must lie in (0, {len(self)})")
        order = rng.permutation(len(self))
        return self.subset(np.sort(order[:cal_size])), self.subset(np.sort(order[cal_size:]))


#
# --- threshold-free metrics ---
#
def auroc(d: ScoredDataset) -> float:
    """P(random incorrect outranks random correct), ties counted one half."""
    d.check_both_classes()
    return float(roc_auc_score(d.labels, d.scores))


def _rejection_precision(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Precision of retained items after rejecting r = 0..n highest scores.

    Items with equal scores are rejected as a group; partial groups count their
    correct items pro rata, which is the expectation over tie orders.
    """
    n = labels.size
    correct = (labels == 0).astype(float)
    order = np.argsort(-scores, kind="stable")
    s_sorted, c_sorted = scores[order], correct[order]

    # group ends in the descending order
    ends = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True)) + 1
    cum_count = np.concatenate(([0], ends))
    cum_correct = np.concatenate(([0.0], np.cumsum(c_sorted)[ends - 1]))

    r = np.arange(n + 1)
    rejected_correct = np.interp(r, cum_count, cum_correct)
    retained = n - r
    precision = np.empty(n + 1)
    precision[:n] = (correct.sum() - rejected_correct[:n]) / retained[:n]
    precision[n] = precision[n - 1]
    return precision


def rejection_curve(d: ScoredDataset) -> tuple[np.ndarray, np.ndarray]:
    """(rejection fraction, retained precision) points for plotting."""
    if len(d) == 0:
        raise MetricError("empty dataset")
    n = len(d)
    return np.arange(n + 1) / n, _rejection_precision(d.scores, d.labels)


def _curve_area(scores: np.ndarray, labels: np.ndarray) -> float:
    n = labels.size
    return float(trapezoid(_rejection_precision(scores, labels), np.arange(n + 1) / n))


def prr(d: ScoredDataset) -> float:
    """Prediction-rejection ratio: 1 for oracle ordering, about 0 for random."""
    d.check_both_classes()
    scores, labels = d.scores, d.labels
    area = _curve_area(scores, labels)
    oracle = _curve_area(labels.astype(float), labels)
    random_area = float((labels == 0).mean())
    if math.isclose(oracle, random_area, abs_tol=1e-12):
        raise MetricError("oracle and random curves coincide")
    return (area - random_area) / (oracle - random_area)


#
# --- recall calibration ---
#
def _threshold_grid(cal: ScoredDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate thresholds (ascending), their recall on cal, and interval bounds."""
    positives = cal.positives
    if positives.size == 0:
        raise MetricError("calibration set has no positives")
    u = np.unique(cal.scores)
    lo_end, hi_end = u[0] - 1.0, u[-1] + 1.0
    mids = u[:-1] + (u[1:] - u[:-1]) / 2.0
    candidates = np.concatenate(([lo_end], mids, [hi_end]))
    bounds = np.concatenate(([lo_end], u, [hi_end]))
    return candidates, recall_at(positives, candidates), bounds


def recall_at(positives: np.ndarray, thresholds) -> np.ndarray:
    """Fraction of positive scores strictly above each threshold."""
    pos = np.sort(np.asarray(positives, dtype=float))
    t = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if pos.size == 0:
        raise MetricError("no positives to measure recall on")
    return (pos.size - np.searchsorted(pos, t, side="right")) / pos.size


def _nearest_levels(levels: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Nearest achievable recall per target; ties go to the higher recall."""
    pos = np.searchsorted(levels, targets, side="left")
    hi = levels[np.minimum(pos, levels.size - 1)]
    lo = levels[np.maximum(pos - 1, 0)]
    return np.where(hi - targets <= targets - lo + 1e-12, hi, lo)


def thresholds_at_recall(
    cal: ScoredDataset,
    targets: np.ndarray,
    mode: ThresholdMode = "midpoint",
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    targets = np.asarray(targets, dtype=float)
    if np.any((targets < 0) | (targets > 1)):
        raise MetricError("recall targets must lie in [0, 1]")
    candidates, recall, bounds = _threshold_grid(cal)
    chosen = _nearest_levels(np.unique(recall), targets)

    # recall is non-increasing along the ascending candidates
    last = np.searchsorted(-recall, -chosen, side="right") - 1
    if mode == "midpoint":
        return candidates[last]
    if mode == "random":
        rng = rng or np.random.default_rng()
        first = np.searchsorted(-recall, -chosen, side="left")
        return rng.uniform(bounds[first], bounds[last + 1])
    raise MetricError(f"unknown threshold mode {mode!r}")


def threshold_at_recall(
    cal: ScoredDataset,
    r_star: float,
    mode: ThresholdMode = "midpoint",
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Threshold on cal whose recall (score > t) is the achievable level nearest r_star.

    Midpoint mode returns the largest such candidate; random mode draws uniformly
    from the whole interval of thresholds reaching that level.
    """
    return float(thresholds_at_recall(cal, np.array([r_star]), mode, rng)[0])


def calibration_curve(
    cal: ScoredDataset,
    test: ScoredDataset,
    targets: Optional[RecallTargetSet] = None,
    mode: ThresholdMode = "midpoint",
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(target recall, cal threshold, achieved test recall) per target."""
    r_star = (targets or RecallTargetSet()).as_array()
    thresholds = thresholds_at_recall(cal, r_star, mode, rng)
    return r_star, thresholds, recall_at(test.positives, thresholds)


def are(
    cal: ScoredDataset,
    test: ScoredDataset,
    targets: Optional[RecallTargetSet] = None,
    mode: ThresholdMode = "midpoint",
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Average recall error: mean |r* - recall_test(t_cal(r*))| over the targets."""
    r_star, _, achieved = calibration_curve(cal, test, targets, mode, rng)
    return float(np.mean(np.abs(r_star - achieved)))


def shift_study(
    methods: Sequence[str],
    cal_sets: Mapping[str, ScoreTable],
    test: ScoreTable,
    *,
    seeds: Sequence[int] = (0,),
    cal_size: Optional[int] = None,
    test_size: Optional[int] = None,
    targets: Optional[RecallTargetSet] = None,
    mode: ThresholdMode = "midpoint",
) -> list[ReportRow]:
    """ARE per (method, calibration set) over seeds, as mean and population sd.

    A calibration set that is the test table itself is split per seed into
    disjoint calibration and test parts.
    """
    if not seeds:
        raise MetricError("at least one seed is required")
    targets = targets or RecallTargetSet()
    rows: list[ReportRow] = []
    for cal_name, cal_table in cal_sets.items():
        per_method: dict[str, list[float]] = {m: [] for m in methods}
        for seed in seeds:
            rng = np.random.default_rng(seed)
            if cal_table is test:
                size = cal_size or len(test) // 2
                cal_part, test_part = test.split(size, rng)
                test_part = test_part.sample(test_size, rng)
            else:
                cal_part = cal_table.sample(cal_size, rng)
                test_part = test.sample(test_size, rng)
            for m in methods:
                per_method[m].append(
                    are(cal_part.dataset(m), test_part.dataset(m), targets, mode, rng)
                )
        for m in methods:
            rows.append(ReportRow.from_values(m, cal_name, "are", per_method[m]))
        logger.info("shift study: %s done for %d methods", cal_name, len(methods))
    return rows
