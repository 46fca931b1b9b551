# scorers/internal.py
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh

from scorers.base import ScorerInputError
from utility.trace_utils import Generation, GenerationTrace


@dataclass(frozen=True)
class HiddenMatrix:
    """Z is d x B: column b is the hidden state of sample b."""

    Z: np.ndarray
    alpha: float = 0.001

    def __post_init__(self):
        Z = np.array(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape[0] < 1 or Z.shape[1] < 1:
            raise ValueError(f"Z must be a d x B matrix with d, B >= 1, got {Z.shape}.")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0.")
        Z.setflags(write=False)
        object.__setattr__(self, "Z", Z)

    @classmethod
    def from_trace(cls, t: GenerationTrace, alpha: float = 0.001) -> "HiddenMatrix":
        gens = list(t.samples) or [t.greedy]
        states = [g.hidden_state for g in gens]
        if any(s is None for s in states):
            raise ScorerInputError("hidden_state required")
        dims = {len(s) for s in states}
        if len(dims) != 1:
            raise ScorerInputError(f"hidden states have mixed dimensions {sorted(dims)}")
        return cls(Z=np.column_stack(states), alpha=alpha)


def inside_eigenscore(h: HiddenMatrix) -> float:
    """Mean log-eigenvalue of Z^T J Z + alpha*I, J centering over the feature axis."""
    centered = h.Z - h.Z.mean(axis=0, keepdims=True)
    cov = centered.T @ centered
    vals = np.clip(eigvalsh((cov + cov.T) / 2.0), 0.0, None)
    return float(np.mean(np.log(vals + h.alpha)))


def attention_score(g: Generation, sign: int = 1) -> float:
    diags = g.attention_diagonals
    if not diags:
        raise ScorerInputError("attention_diagonals required")
    total = 0.0
    for head in diags:
        arr = np.asarray(head, dtype=float)
        if np.any(arr <= 0):
            raise ScorerInputError("attention diagonal entries must be > 0")
        total += float(-np.log(arr).sum())
    return sign * total
