"""Agreement between partitions: normalized mutual information and clustering error."""

from __future__ import annotations

import numpy as np

__all__ = ["contingency", "nmi", "clustering_error"]


def _labels(P) -> np.ndarray:
    labels = getattr(P, "labels", P)
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("a partition is given as one label per vertex")
    return labels


def contingency(P1, P2) -> np.ndarray:
    """Counts ``N[a, b]`` of vertices with label ``a`` in ``P1`` and ``b`` in ``P2``."""
    a, b = _labels(P1), _labels(P2)
    if a.shape != b.shape:
        raise ValueError(f"partitions cover different vertex counts ({a.size} vs {b.size})")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    N = np.zeros((ia.max() + 1 if ia.size else 0, ib.max() + 1 if ib.size else 0))
    np.add.at(N, (ia.ravel(), ib.ravel()), 1.0)
    return N


def _entropy(p) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def nmi(P1, P2) -> float:
    """``2 I(X; Y) / (H(X) + H(Y))``; 1 when both partitions have a single block."""
    N = contingency(P1, P2)
    total = N.sum()
    if total == 0:
        raise ValueError("partitions are empty")
    pxy = N / total
    px, py = pxy.sum(axis=1), pxy.sum(axis=0)
    hx, hy = _entropy(px), _entropy(py)
    if hx + hy == 0:
        return 1.0
    nz = pxy > 0
    mi = float((pxy[nz] * np.log(pxy[nz] / np.outer(px, py)[nz])).sum())
    return min(1.0, max(0.0, 2.0 * mi / (hx + hy)))


def clustering_error(pred, truth) -> float:
    """Fraction of vertices whose true label differs from the majority label of their cluster.

    ``pred`` must have exactly two clusters.  Each cluster counts its
    non-majority vertices; with a tie for the majority either choice gives
    the same count.
    """
    N = contingency(pred, truth)
    if N.shape[0] != 2:
        raise ValueError(f"clustering error needs a bipartition, got {N.shape[0]} clusters")
    return float((N.sum(axis=1) - N.max(axis=1)).sum() / N.sum())
