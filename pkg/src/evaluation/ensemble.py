# evaluation/ensemble.py
"""Score preprocessing and combiners over a fixed roster of method scores."""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Optional, Sequence

import numpy as np
from scipy.special import expit
from sklearn.isotonic import IsotonicRegression

import config
from evaluation.metrics import MetricError, ScoredDataset, ScoreTable, prr, threshold_at_recall
from helpers.logging_helper import get_logger
from utility.report_utils import ReportRow
from utility.trace_utils import SATURATED

logger = get_logger("evaluation.ensemble")

FORMAT_VERSION = 1
ZNORM_SENTINEL = 3.0

PreprocessKind = Literal["raw", "znorm", "isotonic"]
CombinerKind = Literal["max", "min", "mean", "wmean", "voting", "linear", "tree"]

PREPROCESSORS: tuple[str, ...] = ("raw", "znorm", "isotonic")
COMBINERS: tuple[str, ...] = ("max", "min", "mean", "wmean", "voting", "linear", "tree")
STUDY_GRID: dict[str, tuple[str, ...]] = {
    "raw": ("max", "min", "mean", "wmean", "linear"),
    "znorm": ("max", "min", "mean", "wmean", "linear"),
    "isotonic": ("max", "min", "mean", "wmean", "linear", "voting", "tree"),
}


class EnsembleError(ValueError):
    """Degenerate calibration column, roster mismatch or unknown combiner."""


def _sentinel_mask(X: np.ndarray) -> np.ndarray:
    return X >= SATURATED


def _as_matrix(X, width: Optional[int] = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(X, dtype=float))
    if width is not None and arr.shape[1] != width:
        raise EnsembleError(f"expected {width} scores per vector, got {arr.shape[1]}")
    if np.isnan(arr).any():
        raise EnsembleError("score vectors must not contain NaN")
    return arr


#
# --- preprocessing ---
#
@dataclass(frozen=True)
class Preprocessor:
    kind: PreprocessKind
    methods: tuple[str, ...]
    mu: tuple[float, ...] = ()
    sigma: tuple[float, ...] = ()
    # isotonic: per-method breakpoints and levels
    x_points: tuple[tuple[float, ...], ...] = ()
    y_points: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        if self.kind not in PREPROCESSORS:
            raise EnsembleError(f"unknown preprocessor {self.kind!r}")
        k = len(self.methods)
        if self.kind == "znorm":
            if len(self.mu) != k or len(self.sigma) != k:
                raise EnsembleError("znorm needs one (mu, sigma) per method")
            if any(s <= 0 for s in self.sigma):
                raise EnsembleError("znorm sigma must be > 0")
        if self.kind == "isotonic":
            if len(self.x_points) != k or len(self.y_points) != k:
                raise EnsembleError("isotonic needs one breakpoint set per method")
            for xs, ys in zip(self.x_points, self.y_points):
                if len(xs) != len(ys) or not xs:
                    raise EnsembleError("isotonic breakpoints and levels must align")
                if any(a > b for a, b in zip(ys, ys[1:])):
                    raise EnsembleError("isotonic levels must be nondecreasing")

    def apply(self, X) -> np.ndarray:
        X = _as_matrix(X, len(self.methods))
        if self.kind == "raw":
            return X.copy()
        if self.kind == "znorm":
            mask = _sentinel_mask(X)
            safe = np.where(mask, 0.0, X)
            out = (safe - np.array(self.mu)) / np.array(self.sigma)
            return np.where(mask, ZNORM_SENTINEL, out)
        out = np.empty_like(X)
        for j, (xs, ys) in enumerate(zip(self.x_points, self.y_points)):
            out[:, j] = _step_lookup(np.array(xs), np.array(ys), X[:, j])
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "methods": list(self.methods),
            "mu": list(self.mu),
            "sigma": list(self.sigma),
            "x_points": [list(x) for x in self.x_points],
            "y_points": [list(y) for y in self.y_points],
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Preprocessor":
        return cls(
            kind=raw["kind"],
            methods=tuple(raw["methods"]),
            mu=tuple(raw.get("mu", ())),
            sigma=tuple(raw.get("sigma", ())),
            x_points=tuple(tuple(x) for x in raw.get("x_points", ())),
            y_points=tuple(tuple(y) for y in raw.get("y_points", ())),
        )


def _step_lookup(xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Level of the last breakpoint <= value, clamped at both ends."""
    idx = np.searchsorted(xs, values, side="right") - 1
    return ys[np.clip(idx, 0, xs.size - 1)]


def _methods_for(X: np.ndarray, methods: Optional[Sequence[str]]) -> tuple[str, ...]:
    if methods is None:
        return tuple(f"m{j}" for j in range(X.shape[1]))
    if len(methods) != X.shape[1]:
        raise EnsembleError(f"{len(methods)} method names for {X.shape[1]} columns")
    return tuple(methods)


def raw_preprocessor(methods: Sequence[str]) -> Preprocessor:
    return Preprocessor(kind="raw", methods=tuple(methods))


def fit_znorm(X, methods: Optional[Sequence[str]] = None) -> Preprocessor:
    """Per-method mean and population sd over finite calibration scores."""
    X = _as_matrix(X)
    names = _methods_for(X, methods)
    mu, sigma = [], []
    for j, name in enumerate(names):
        col = X[~_sentinel_mask(X[:, j]), j]
        if col.size < 2:
            raise EnsembleError(f"{name}: need >= 2 finite calibration scores")
        s = float(col.std(ddof=0))
        if s <= 0:
            raise EnsembleError(f"{name}: constant calibration column")
        mu.append(float(col.mean()))
        sigma.append(s)
    return Preprocessor(kind="znorm", methods=names, mu=tuple(mu), sigma=tuple(sigma))


def fit_isotonic(X, labels, methods: Optional[Sequence[str]] = None) -> Preprocessor:
    """Nondecreasing map score -> P(incorrect) per method, by pool-adjacent-violators."""
    X = _as_matrix(X)
    y = np.asarray(labels, dtype=float)
    if X.shape[0] == 0 or y.size != X.shape[0]:
        raise EnsembleError("isotonic calibration needs one label per score vector")
    names = _methods_for(X, methods)
    xs_all, ys_all = [], []
    for j, name in enumerate(names):
        keep = ~_sentinel_mask(X[:, j])
        if not keep.any():
            raise EnsembleError(f"{name}: no finite calibration scores")
        reg = IsotonicRegression(y_min=0.0, y_max=1.0, increasing=True, out_of_bounds="clip")
        reg.fit(X[keep, j], y[keep])
        xs_all.append(tuple(float(v) for v in reg.X_thresholds_))
        ys_all.append(tuple(float(v) for v in reg.y_thresholds_))
    return Preprocessor(
        kind="isotonic", methods=names, x_points=tuple(xs_all), y_points=tuple(ys_all)
    )


def fit_preprocessor(
    kind: PreprocessKind, X, labels, methods: Optional[Sequence[str]] = None
) -> Preprocessor:
    X = _as_matrix(X)
    if kind == "raw":
        return raw_preprocessor(_methods_for(X, methods))
    if kind == "znorm":
        return fit_znorm(X, methods)
    if kind == "isotonic":
        return fit_isotonic(X, labels, methods)
    raise EnsembleError(f"unknown preprocessor {kind!r}")


#
# --- models ---
#
@dataclass(frozen=True, slots=True)
class TreeNode:
    value: float
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(frozen=True)
class EnsembleModel:
    kind: CombinerKind
    preprocessor: Preprocessor
    weights: tuple[float, ...] = ()
    thresholds: tuple[float, ...] = ()
    coef: tuple[float, ...] = ()
    intercept: float = 0.0
    center: tuple[float, ...] = ()
    scale: tuple[float, ...] = ()
    # linear/tree features: sentinels capped at the calibration column max
    caps: tuple[float, ...] = ()
    nodes: tuple[TreeNode, ...] = ()
    converged: bool = True
    extra: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in COMBINERS:
            raise EnsembleError(f"unknown combiner {self.kind!r}")
        k = len(self.preprocessor.methods)
        if self.kind == "wmean" and (
            len(self.weights) != k or not all(math.isfinite(w) and w >= 0 for w in self.weights)
        ):
            raise EnsembleError("wmean needs one finite non-negative weight per method")
        if self.kind == "voting" and len(self.thresholds) != k:
            raise EnsembleError("voting needs one threshold per method")
        if self.kind == "linear" and len(self.coef) != k:
            raise EnsembleError("linear model needs one coefficient per method")
        if self.kind == "tree" and not self.nodes:
            raise EnsembleError("tree model has no nodes")

    @property
    def methods(self) -> tuple[str, ...]:
        return self.preprocessor.methods

    def predict(self, X) -> np.ndarray:
        Z = self.preprocessor.apply(X)
        return np.array([_combine_row(row, self) for row in Z])

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "preprocessor": self.preprocessor.to_dict(),
            "weights": list(self.weights),
            "thresholds": list(self.thresholds),
            "coef": list(self.coef),
            "intercept": self.intercept,
            "center": list(self.center),
            "scale": list(self.scale),
            "caps": list(self.caps),
            "nodes": [
                [n.value, n.feature, n.threshold, n.left, n.right] for n in self.nodes
            ],
            "converged": self.converged,
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "EnsembleModel":
        version = raw.get("version")
        if version != FORMAT_VERSION:
            raise EnsembleError(f"unsupported model version {version!r}")
        return cls(
            kind=raw["kind"],
            preprocessor=Preprocessor.from_dict(raw["preprocessor"]),
            weights=tuple(raw.get("weights", ())),
            thresholds=tuple(raw.get("thresholds", ())),
            coef=tuple(raw.get("coef", ())),
            intercept=float(raw.get("intercept", 0.0)),
            center=tuple(raw.get("center", ())),
            scale=tuple(raw.get("scale", ())),
            caps=tuple(raw.get("caps", ())),
            nodes=tuple(
                TreeNode(float(v), int(f), float(t), int(l), int(r))
                for v, f, t, l, r in raw.get("nodes", ())
            ),
            converged=bool(raw.get("converged", True)),
            extra=dict(raw.get("extra", {})),
        )


def save_model(model: EnsembleModel, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="\n") as f:
        json.dump(model.to_dict(), f, indent=2)


def load_model(path: str | Path) -> EnsembleModel:
    p = Path(path)
    if not p.exists():
        raise EnsembleError(f"model file not found: {p}")
    try:
        with p.open(encoding="utf-8") as f:
            return EnsembleModel.from_dict(json.load(f))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise EnsembleError(f"invalid model file {p}: {e}") from e


#
# --- combining ---
#
def _capped(row: np.ndarray, caps: Sequence[float]) -> np.ndarray:
    return np.minimum(row, np.array(caps)) if caps else row


def _tree_value(nodes: Sequence[TreeNode], row: np.ndarray) -> float:
    node = nodes[0]
    while not node.is_leaf:
        node = nodes[node.left] if row[node.feature] <= node.threshold else nodes[node.right]
    return node.value


def _combine_row(v: np.ndarray, m: EnsembleModel) -> float:
    mask = _sentinel_mask(v)
    finite = v[~mask]
    if m.kind == "max":
        return SATURATED if mask.any() else float(v.max())
    if m.kind in ("min", "mean"):
        if finite.size == 0:
            return SATURATED
        return float(finite.min() if m.kind == "min" else finite.mean())
    if m.kind == "wmean":
        w = np.array(m.weights)[~mask]
        if finite.size == 0:
            return SATURATED
        if w.sum() <= 0:
            return float(finite.mean())
        return float(np.dot(w, finite) / w.sum())
    if m.kind == "voting":
        return float(np.sum(v > np.array(m.thresholds)))
    if m.kind == "linear":
        z = (_capped(v, m.caps) - np.array(m.center)) / np.array(m.scale)
        return float(expit(np.dot(z, m.coef) + m.intercept))
    return _tree_value(m.nodes, _capped(v, m.caps))


def combine(v, m: EnsembleModel) -> float:
    """Preprocess one raw score vector and reduce it with the model's combiner."""
    row = _as_matrix(v, len(m.methods))
    if row.shape[0] != 1:
        raise EnsembleError("combine takes a single score vector")
    return _combine_row(m.preprocessor.apply(row)[0], m)


#
# --- fitting ---
#
def _column_caps(Z: np.ndarray) -> tuple[float, ...]:
    caps = []
    for j in range(Z.shape[1]):
        col = Z[~_sentinel_mask(Z[:, j]), j]
        caps.append(float(col.max()) if col.size else 0.0)
    return tuple(caps)


def _check_labels(y: np.ndarray, n: int) -> None:
    if y.size != n:
        raise EnsembleError(f"{y.size} labels for {n} score vectors")
    if not np.isin(y, (0, 1)).all():
        raise EnsembleError("labels must be 0 or 1")


def fit_simple(kind: CombinerKind, pre: Preprocessor) -> EnsembleModel:
    if kind not in ("max", "min", "mean"):
        raise EnsembleError(f"{kind!r} needs calibration labels")
    return EnsembleModel(kind=kind, preprocessor=pre)


def fit_weighted(X, labels, pre: Preprocessor) -> EnsembleModel:
    """Weights are each method's calibration PRR, floored at 0."""
    Z = pre.apply(X)
    y = np.asarray(labels, dtype=int)
    _check_labels(y, Z.shape[0])
    weights = []
    for j, name in enumerate(pre.methods):
        try:
            w = prr(ScoredDataset.from_arrays(Z[:, j], y))
        except MetricError as e:
            logger.warning("wmean: no PRR for %s (%s); weight 0", name, e)
            w = 0.0
        weights.append(max(w, 0.0))
    return EnsembleModel(kind="wmean", preprocessor=pre, weights=tuple(weights))


def fit_voting(X, labels, pre: Preprocessor, r_star: float = 0.5) -> EnsembleModel:
    """Per-method threshold at recall r_star on the calibration set."""
    Z = pre.apply(X)
    y = np.asarray(labels, dtype=int)
    _check_labels(y, Z.shape[0])
    thresholds = tuple(
        threshold_at_recall(ScoredDataset.from_arrays(Z[:, j], y), r_star)
        for j in range(Z.shape[1])
    )
    return EnsembleModel(kind="voting", preprocessor=pre, thresholds=thresholds)


def fit_linear(
    X,
    labels,
    pre: Optional[Preprocessor] = None,
    *,
    l2: float = 1e-3,
    iterations: int = 2000,
    lr: float = 1.0,
    tol: float = 1e-6,
) -> EnsembleModel:
    """L2-penalized logistic regression by full-batch gradient descent from zero.

    Features are standardized on the calibration set; the intercept is not
    penalized. The fit is flagged unconverged when the final gradient norm
    exceeds tol.
    """
    X = _as_matrix(X)
    pre = pre or raw_preprocessor(_methods_for(X, None))
    Z = pre.apply(X)
    y = np.asarray(labels, dtype=float)
    _check_labels(y, Z.shape[0])
    if y.min() == y.max():
        raise EnsembleError("linear model needs both labels")

    caps = _column_caps(Z)
    Z = np.minimum(Z, np.array(caps))
    center = Z.mean(axis=0)
    scale = Z.std(axis=0, ddof=0)
    scale[scale <= 0] = 1.0
    F = (Z - center) / scale

    n = F.shape[0]
    w = np.zeros(F.shape[1])
    b = 0.0
    grad_norm = math.inf
    for _ in range(iterations):
        err = expit(F @ w + b) - y
        g_w = F.T @ err / n + l2 * w
        g_b = float(err.mean())
        grad_norm = float(np.sqrt(g_w @ g_w + g_b * g_b))
        if grad_norm < tol:
            break
        w -= lr * g_w
        b -= lr * g_b

    converged = grad_norm < tol
    if not converged:
        logger.warning("linear ensemble did not converge (gradient norm %.3e)", grad_norm)
    return EnsembleModel(
        kind="linear",
        preprocessor=pre,
        coef=tuple(float(c) for c in w),
        intercept=float(b),
        center=tuple(float(c) for c in center),
        scale=tuple(float(s) for s in scale),
        caps=caps,
        converged=converged,
        extra={"gradient_norm": grad_norm},
    )


def _gini(y: np.ndarray) -> float:
    if y.size == 0:
        return 0.0
    p = y.mean()
    return 2.0 * p * (1.0 - p)


def best_split(
    F: np.ndarray, y: np.ndarray, min_leaf: int
) -> Optional[tuple[int, float, float]]:
    """(feature, threshold, weighted child gini) of the best admissible split.

    Thresholds are midpoints between sorted distinct values; ties go to the
    lowest feature, then the lowest threshold.
    """
    n = y.size
    best: Optional[tuple[int, float, float]] = None
    for j in range(F.shape[1]):
        values = np.unique(F[:, j])
        for lo, hi in zip(values[:-1], values[1:]):
            t = lo + (hi - lo) / 2.0
            left = F[:, j] <= t
            n_left = int(left.sum())
            if n_left < min_leaf or n - n_left < min_leaf:
                continue
            score = (n_left * _gini(y[left]) + (n - n_left) * _gini(y[~left])) / n
            if best is None or score < best[2] - 1e-12:
                best = (j, float(t), score)
    return best


def fit_tree(
    X,
    labels,
    pre: Optional[Preprocessor] = None,
    *,
    max_depth: int = 3,
    min_leaf: int = 5,
) -> EnsembleModel:
    """Greedy Gini tree; leaves hold the incorrectness rate of their rows."""
    X = _as_matrix(X)
    pre = pre or raw_preprocessor(_methods_for(X, None))
    Z = pre.apply(X)
    y = np.asarray(labels, dtype=float)
    _check_labels(y, Z.shape[0])
    if y.size == 0:
        raise EnsembleError("tree needs calibration rows")

    caps = _column_caps(Z)
    F = np.minimum(Z, np.array(caps))
    nodes: list[Optional[TreeNode]] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        idx = len(nodes)
        nodes.append(None)
        ys = y[rows]
        value = float(ys.mean())
        split = None
        if depth < max_depth and 0.0 < value < 1.0:
            split = best_split(F[rows], ys, min_leaf)
            if split is not None and split[2] >= _gini(ys) - 1e-12:
                split = None
        if split is None:
            nodes[idx] = TreeNode(value=value)
            return idx
        feature, threshold, _ = split
        go_left = F[rows, feature] <= threshold
        left = grow(rows[go_left], depth + 1)
        right = grow(rows[~go_left], depth + 1)
        nodes[idx] = TreeNode(value, feature, threshold, left, right)
        return idx

    grow(np.arange(y.size), 0)
    return EnsembleModel(kind="tree", preprocessor=pre, caps=caps, nodes=tuple(nodes))


def fit_model(
    kind: CombinerKind,
    X,
    labels,
    pre: Preprocessor,
    cfg: Optional[config.EnsembleConfig] = None,
) -> EnsembleModel:
    cfg = cfg or config.EnsembleConfig()
    if kind in ("max", "min", "mean"):
        return fit_simple(kind, pre)
    if kind == "wmean":
        return fit_weighted(X, labels, pre)
    if kind == "voting":
        return fit_voting(X, labels, pre)
    if kind == "linear":
        return fit_linear(
            X,
            labels,
            pre,
            l2=cfg.linear_l2,
            iterations=cfg.linear_iterations,
            lr=cfg.linear_lr,
        )
    if kind == "tree":
        return fit_tree(
            X, labels, pre, max_depth=cfg.tree_max_depth, min_leaf=cfg.tree_min_leaf
        )
    raise EnsembleError(f"unknown combiner {kind!r}")


#
# --- study ---
#
def _matrix(table: ScoreTable, methods: Sequence[str]) -> np.ndarray:
    missing = [m for m in methods if m not in table.scores]
    if missing:
        raise EnsembleError(f"scores missing for {', '.join(missing)}")
    return np.column_stack([table.scores[m] for m in methods])


def best_single(methods: Sequence[str], cal: ScoreTable, test: ScoreTable) -> tuple[str, float]:
    """Method with the highest calibration PRR, and its test PRR."""
    ranked = sorted(methods, key=lambda m: -prr(cal.dataset(m)))
    return ranked[0], prr(test.dataset(ranked[0]))


def ensemble_study(
    methods: Sequence[str],
    cal: ScoreTable,
    test: ScoreTable,
    cfg: Optional[config.EnsembleConfig] = None,
    *,
    cal_name: str = "cal",
    seeds: Sequence[int] = (0,),
    exclude: Sequence[str] = (),
) -> list[ReportRow]:
    """Test PRR for every (preprocessor, combiner) cell plus the best single method.

    Rows are named "<preprocessor>:<combiner>". When cal is the test table it is
    split per seed into disjoint calibration and test parts.
    """
    cfg = cfg or config.EnsembleConfig()
    roster = [m for m in methods if m not in set(exclude)]
    if not roster:
        return []

    cells: dict[str, list[float]] = {"best_single": []}
    for kind, combiners in STUDY_GRID.items():
        for c in combiners:
            cells[f"{kind}:{c}"] = []

    for seed in seeds:
        rng = np.random.default_rng(seed)
        if cal is test:
            cal_part, test_part = test.split(min(cfg.cal_size, len(test) // 2), rng)
        else:
            cal_part, test_part = cal.sample(cfg.cal_size, rng), test
        X_cal, y_cal = _matrix(cal_part, roster), cal_part.labels
        X_test = _matrix(test_part, roster)

        name, value = best_single(roster, cal_part, test_part)
        logger.info("seed %d: best single method %s (test PRR %.3f)", seed, name, value)
        cells["best_single"].append(value)

        for kind, combiners in STUDY_GRID.items():
            pre = fit_preprocessor(kind, X_cal, y_cal, roster)
            for c in combiners:
                model = fit_model(c, X_cal, y_cal, pre, cfg)
                preds = model.predict(X_test)
                cells[f"{kind}:{c}"].append(
                    prr(ScoredDataset.from_arrays(preds, test_part.labels))
                )

    return [
        ReportRow.from_values(cell, cal_name, "prr", values) for cell, values in cells.items()
    ]
