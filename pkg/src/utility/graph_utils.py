# utility/graph_utils.py
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from utility.trace_utils import SimilarityMatrix


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SemanticGraph:
    """Weighted similarity graph over m generations with both Laplacians."""

    W: np.ndarray
    degrees: np.ndarray
    L_norm: np.ndarray
    L_unnorm: np.ndarray

    def __post_init__(self):
        for name in ("W", "degrees", "L_norm", "L_unnorm"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def size(self) -> int:
        return int(self.W.shape[0])

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.degrees)


def graph_from_weights(W: np.ndarray) -> SemanticGraph:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
        raise ValueError(f"W must be a non-empty square matrix, got shape {W.shape}.")
    if not np.allclose(W, W.T):
        raise ValueError("W must be symmetric.")
    if np.any(W < 0) or np.any(W > 1):
        raise ValueError("W entries must lie in [0, 1].")
    if not np.allclose(np.diag(W), 1.0):
        raise ValueError("W must have a unit diagonal.")

    degrees = W.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    m = W.shape[0]
    L_norm = np.eye(m) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    L_unnorm = np.diag(degrees) - W
    return SemanticGraph(W=W, degrees=degrees, L_norm=L_norm, L_unnorm=L_unnorm)


def build_graph(sim: SimilarityMatrix) -> SemanticGraph:
    """W = symmetrized mean of forward and backward judgments."""
    W = sim.mean()
    W = (W + W.T) / 2.0
    np.fill_diagonal(W, 1.0)
    return graph_from_weights(W)


def fix_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Make each column's largest-magnitude entry positive; ties go to the lowest index."""
    out = np.array(vectors, dtype=float, copy=True)
    for c in range(out.shape[1]):
        col = out[:, c]
        mags = np.abs(col)
        idx = int(np.flatnonzero(mags >= mags.max() - tol)[0])
        if col[idx] < 0:
            out[:, c] = -col
    return out


def sorted_eigh(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenpairs of a symmetric matrix with deterministic eigenvector signs."""
    vals, vecs = eigh(np.asarray(mat, dtype=float))
    order = np.argsort(vals, kind="stable")
    return vals[order], fix_signs(vecs[:, order])


def greedy_clusters(bidirectional: np.ndarray, threshold: float = 0.5) -> list[int]:
    """
    Scan items in order; each joins the first existing cluster whose representative
    (first member) it mutually entails above `threshold`, else opens a new cluster.
    """
    n = bidirectional.shape[0]
    representatives: list[int] = []
    assignment: list[int] = []
    for i in range(n):
        for cid, rep in enumerate(representatives):
            if bidirectional[i, rep] > threshold:
                assignment.append(cid)
                break
        else:
            assignment.append(len(representatives))
            representatives.append(i)
    return assignment
