"""Hypergraph incidence, degrees, the normalized operator and hyperedge convolution.

With incidence ``H`` (functions x hyperedges), hyperedge weights ``W``,
hyperedge degrees ``De`` and vertex degrees ``Dv``::

    theta = Dv^-1/2 H W De^-1 H^T Dv^-1/2
    delta = I - theta
    Z     = act(theta X beta)

``theta`` is applied as two gathers (vertex -> hyperedge -> vertex) rather
than as a dense n x n matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._numeric import ordered_segment_sum, rowstable_matmul
from .errors import NotSymmetric, ShapeMismatch, UnknownFunction, ZeroDegree


@dataclass
class Hypergraph:
    """Incidence in coordinate form plus per-hyperedge weights.

    ``rows[k]``/``cols[k]`` mark function ``rows[k]`` as a member of hyperedge
    ``cols[k]``. ``edge_clusters[j]`` is the behavior cluster behind column
    ``j``, or ``-1`` for singleton padding.
    """

    n_vertices: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    edge_clusters: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.weights)

    def matrix(self) -> sp.csr_matrix:
        data = np.ones(len(self.rows))
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=(self.n_vertices, self.n_edges))

    def dense(self) -> np.ndarray:
        return self.matrix().toarray()

    def with_weights(self, weights) -> "Hypergraph":
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.n_edges,) or np.any(weights < 0):
            raise ValueError("weights must be one nonnegative value per hyperedge")
        return Hypergraph(self.n_vertices, self.rows, self.cols, weights, self.edge_clusters)

    def permuted(self, perm) -> "Hypergraph":
        """Relabel vertices so that new vertex ``i`` is old vertex ``perm[i]``."""
        inverse = np.empty(self.n_vertices, dtype=np.int64)
        inverse[np.asarray(perm)] = np.arange(self.n_vertices)
        return Hypergraph(self.n_vertices, inverse[self.rows], self.cols, self.weights, self.edge_clusters)


def incidence(hyperedges, function_ids) -> Hypergraph:
    """Build the incidence structure; uncovered functions get singleton hyperedges."""
    position = {fid: i for i, fid in enumerate(function_ids)}
    rows, cols, clusters = [], [], []
    covered = set()
    for j, edge in enumerate(hyperedges):
        members = sorted({position[m] if m in position else _unknown(m) for m in edge.members})
        if not members:
            continue
        col = len(clusters)
        rows.extend(members)
        cols.extend([col] * len(members))
        clusters.append(edge.cluster)
        covered.update(members)
    for i in range(len(function_ids)):
        if i not in covered:
            rows.append(i)
            cols.append(len(clusters))
            clusters.append(-1)
    return Hypergraph(
        len(function_ids),
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        np.ones(len(clusters)),
        np.array(clusters, dtype=np.int64),
    )


def _unknown(fid):
    raise UnknownFunction(fid)


def from_dense(H, weights=None) -> Hypergraph:
    H = np.asarray(H)
    rows, cols = np.nonzero(H)
    w = np.ones(H.shape[1]) if weights is None else np.asarray(weights, dtype=np.float64)
    return Hypergraph(H.shape[0], rows.astype(np.int64), cols.astype(np.int64), w, np.arange(H.shape[1]))


def degrees(hg: Hypergraph):
    """Return ``(vertex_degrees, edge_degrees)`` as 1-D arrays."""
    edge_deg = np.bincount(hg.cols, minlength=hg.n_edges).astype(np.float64)
    vertex_deg = np.bincount(hg.rows, weights=hg.weights[hg.cols], minlength=hg.n_vertices)
    return vertex_deg, edge_deg


@dataclass
class NormalizedOperator:
    theta: np.ndarray
    delta: np.ndarray


def normalized_operator(hg: Hypergraph, degs=None) -> NormalizedOperator:
    """Dense ``theta`` and ``delta = I - theta``, symmetric by construction."""
    dv, de = degrees(hg) if degs is None else degs
    if np.any(dv <= 0) or np.any(de <= 0):
        raise ZeroDegree("every vertex and hyperedge needs positive degree")
    H = hg.dense()
    left = H / np.sqrt(dv)[:, None]
    theta = (left * (hg.weights / de)) @ left.T
    theta = 0.5 * (theta + theta.T)
    return NormalizedOperator(theta, np.eye(hg.n_vertices) - theta)


def spectral_oracle(delta):
    """Full symmetric eigendecomposition ``(eigenvalues, eigenvectors)``."""
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape[0] != delta.shape[1] or not np.array_equal(delta, delta.T):
        raise NotSymmetric("matrix is not exactly symmetric")
    return np.linalg.eigh(delta)


class Propagator:
    """Applies ``theta`` to feature matrices through vertex -> hyperedge -> vertex sums.

    Accumulation order is fixed by value, so relabeling vertices permutes the
    result exactly.
    """

    def __init__(self, hg: Hypergraph):
        dv, de = degrees(hg)
        if np.any(dv <= 0) or np.any(de <= 0):
            raise ZeroDegree("every vertex and hyperedge needs positive degree")
        self.hg = hg
        self.inv_sqrt_dv = 1.0 / np.sqrt(dv)
        self.edge_scale = hg.weights / de

    def apply(self, X) -> np.ndarray:
        hg = self.hg
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] != hg.n_vertices:
            raise ShapeMismatch(f"{X.shape[0]} feature rows for {hg.n_vertices} vertices")
        Y = X * self.inv_sqrt_dv[:, None]
        E = ordered_segment_sum(Y[hg.rows], hg.cols, hg.n_edges) * self.edge_scale[:, None]
        V = ordered_segment_sum(E[hg.cols], hg.rows, hg.n_vertices)
        return V * self.inv_sqrt_dv[:, None]

    # theta is symmetric, so its transpose-apply is itself
    apply_transpose = apply


def hyperedge_conv(X, hg: Hypergraph, beta, activate: bool = True, propagator: Propagator | None = None):
    """``act(theta X beta)`` with ReLU when ``activate`` is set."""
    X = np.asarray(X, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if X.ndim != 2 or beta.ndim != 2 or X.shape[1] != beta.shape[0]:
        raise ShapeMismatch(f"features {X.shape} incompatible with filter {beta.shape}")
    prop = propagator or Propagator(hg)
    Z = rowstable_matmul(prop.apply(X), beta)
    return np.maximum(Z, 0.0) if activate else Z
