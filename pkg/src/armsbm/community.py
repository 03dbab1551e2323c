"""Community recovery from node embeddings plus label-agreement metrics."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "ClusterResult",
    "kmeans_membership",
    "extract_membership",
    "hamming_loss",
    "adjusted_rand_index",
]


@dataclass(frozen=True)
class ClusterResult:
    """Labels in [0, k), final centers (k, d), within-cluster sum of squares."""

    labels: np.ndarray
    centers: np.ndarray
    inertia: float

_BRUTE_FORCE_MAX_K = 8


def _plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted (k-means++) seeding."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(
    x: np.ndarray, centers: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, np.ndarray, float]:
    n, k = x.shape[0], centers.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = x[members].mean(axis=0)
            else:
                # repair an empty cluster with the point farthest from its center
                worst = int(np.argmax(d2[np.arange(n), labels]))
                new_centers[j] = x[worst]
        shift = float(np.max(np.abs(new_centers - centers)))
        centers = new_centers
        if shift <= tol:
            break
    d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    return labels, centers, inertia


def kmeans_membership(
    x: np.ndarray,
    k: int,
    seed: int | np.random.SeedSequence,
    restarts: int = 20,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> ClusterResult:
    """Euclidean k-means with multiple seeded restarts.

    Deterministic for a fixed seed; the restart with the lowest within-cluster
    sum of squares wins.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d embedding, got ndim={x.ndim}")
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k={k} out of range for {x.shape[0]} points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers = _plusplus_init(x, k, rng)
        labels, centers, inertia = _lloyd(x, centers, max_iter, tol)
        if best is None or inertia < best.inertia - 1e-12:
            best = ClusterResult(labels=labels, centers=centers, inertia=inertia)
    return best


def extract_membership(result: ClusterResult | np.ndarray) -> np.ndarray:
    """Canonical relabeling: clusters numbered by order of first appearance."""
    labels = result.labels if isinstance(result, ClusterResult) else result
    labels = np.asarray(labels)
    mapping: dict[int, int] = {}
    out = np.empty(labels.shape, dtype=np.int64)
    for i, lab in enumerate(labels):
        key = int(lab)
        if key not in mapping:
            mapping[key] = len(mapping)
        out[i] = mapping[key]
    return out


def _contingency(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    cu, iu = np.unique(u, return_inverse=True)
    cv, iv = np.unique(v, return_inverse=True)
    table = np.zeros((cu.size, cv.size), dtype=np.int64)
    np.add.at(table, (iu, iv), 1)
    return table


def hamming_loss(u: np.ndarray, v: np.ndarray) -> float:
    """Normalized Hamming distance minimized over cluster relabelings.

    Exhaustive over permutations for at most 8 clusters, optimal assignment
    beyond that.
    """
    u = np.asarray(u).ravel()
    v = np.asarray(v).ravel()
    if u.shape != v.shape:
        raise ValueError("label vectors must have equal length")
    n = u.size
    table = _contingency(u, v)
    r, c = table.shape
    k = max(r, c)
    padded = np.zeros((k, k), dtype=np.int64)
    padded[:r, :c] = table
    if k <= _BRUTE_FORCE_MAX_K:
        agree = max(sum(padded[i, p[i]] for i in range(k)) for p in permutations(range(k)))
    else:
        rows, cols = linear_sum_assignment(-padded)
        agree = int(padded[rows, cols].sum())
    return float(n - agree) / n


def adjusted_rand_index(u: np.ndarray, v: np.ndarray) -> float:
    """Chance-adjusted pair-counting agreement between two labelings."""
    u = np.asarray(u).ravel()
    v = np.asarray(v).ravel()
    if u.shape != v.shape:
        raise ValueError("label vectors must have equal length")
    table = _contingency(u, v)
    n = u.size
    if n < 2:
        raise ValueError("need at least two points")

    def comb2(x):
        return x * (x - 1) / 2.0

    a = comb2(table).sum()
    b = comb2(table.sum(axis=1)).sum()
    c = comb2(table.sum(axis=0)).sum()
    n2 = comb2(n)
    expected = b * c / n2
    denom = (b + c) / 2.0 - expected
    if denom == 0:
        # both labelings are trivial (all-one-cluster or all-singletons)
        return 1.0
    return float((a - expected) / denom)
