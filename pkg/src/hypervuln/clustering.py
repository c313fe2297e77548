"""k-means over behavior vectors and the hyperedges it induces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ClusterAssignment:
    function_ids: list
    clusters: np.ndarray

    def __iter__(self):
        return iter(zip(self.function_ids, self.clusters.tolist()))

    def __len__(self):
        return len(self.function_ids)


@dataclass(frozen=True)
class Hyperedge:
    cluster: int
    members: tuple


def squared_distances(X, centroids) -> np.ndarray:
    # explicit differences, not the |x|^2 - 2xc + |c|^2 expansion, so that
    # equal distances compare equal and ties resolve to the lowest index
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def assign_new(vectors, centroids) -> np.ndarray:
    """Nearest centroid per vector; ties go to the lowest index."""
    X = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if X.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    centroids = np.asarray(centroids, dtype=np.float64)
    rows = max(1, 4_000_000 // max(1, centroids.size))
    out = np.empty(X.shape[0], dtype=np.int64)
    for start in range(0, X.shape[0], rows):
        out[start:start + rows] = np.argmin(squared_distances(X[start:start + rows], centroids), axis=1)
    return out


def sse(X, centroids, labels) -> float:
    return float(np.sum((X - centroids[labels]) ** 2))


def _plusplus(X, k, rng):
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            break
        idx = int(np.searchsorted(np.cumsum(closest) / total, rng.random(), side="right"))
        idx = min(idx, n - 1)
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((X - X[idx]) ** 2, axis=1))
    return X[chosen].copy()


def _update(X, labels, centroids):
    k = centroids.shape[0]
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        # re-seed an empty cluster at the point farthest from its centroid
        dist = np.sum((X - centroids[labels]) ** 2, axis=1)
        dist[counts[labels] <= 1] = -1.0
        far = int(np.argmax(dist))
        if dist[far] < 0:
            continue
        counts[labels[far]] -= 1
        labels[far] = j
        counts[j] = 1
        centroids = centroids.copy()
        centroids[j] = X[far]
    new = np.zeros_like(centroids)
    np.add.at(new, labels, X)
    nonempty = counts > 0
    new[nonempty] /= counts[nonempty, None]
    new[~nonempty] = centroids[~nonempty]
    return new


def kmeans(vectors, K: int, seed: int = 0, max_iters: int = 300, function_ids=None):
    """Lloyd's algorithm with k-means++ seeding.

    Returns ``(centroids, ClusterAssignment)``. When ``K`` is at least the
    number of distinct vectors, each distinct vector becomes its own
    centroid. The returned assignment always equals :func:`assign_new` on the
    returned centroids.
    """
    X = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("kmeans needs at least one vector")
    if K < 1:
        raise ValueError("K must be >= 1")
    ids = list(function_ids) if function_ids is not None else list(range(X.shape[0]))
    if len(ids) != X.shape[0]:
        raise ValueError("function_ids must align with vectors")
    distinct = np.unique(X, axis=0)
    if K >= distinct.shape[0]:
        centroids = distinct
        return centroids, ClusterAssignment(ids, assign_new(X, centroids))

    rng = np.random.default_rng(seed)
    centroids = _plusplus(X, K, rng)
    labels = assign_new(X, centroids)
    for _ in range(max_iters):
        centroids = _update(X, labels, centroids)
        new_labels = assign_new(X, centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    labels = assign_new(X, centroids)
    return centroids, ClusterAssignment(ids, labels)


def build_hyperedges(assignment: ClusterAssignment, min_members: int = 1) -> list[Hyperedge]:
    """Group distinct member functions per cluster; drop clusters below ``min_members``."""
    groups: dict[int, set] = {}
    for fid, cluster in assignment:
        groups.setdefault(int(cluster), set()).add(fid)
    return [
        Hyperedge(c, tuple(sorted(groups[c], key=str)))
        for c in sorted(groups)
        if len(groups[c]) >= max(1, min_members)
    ]
