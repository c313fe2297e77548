"""Gated graph neural network encoder for whole functions and behavior slices.

One propagation step on node states ``H`` with binary symmetric adjacency
``A``::

    m  = A H
    z  = sigmoid(m Wz + H Uz + bz)
    r  = sigmoid(m Wr + H Ur + br)
    h~ = tanh(m Wh + (r * H) Uh + bh)
    H' = (1 - z) * H + z * h~

After ``T`` shared-weight steps, each step's node states are mean-pooled per
graph; the ``T`` pooled vectors are concatenated and projected back to ``d``.

Two numerically equivalent forward paths exist. The exact path
(``exact=True``) uses order-independent kernels so that relabeling nodes
leaves the output bit-identical; the fast path uses BLAS and sparse products
and is what training runs on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._numeric import glorot, ordered_segment_sum, rowstable_matmul, sigmoid
from .cpg import Cpg
from .embedding import EmbeddingTable, Vocabulary, embed_nodes
from .errors import DegenerateLabels, EmptyGraph, ShapeMismatch
from .metrics import f_measure
from .optim import Adam, TrainConfig, bce, bce_logit_grad, l2_penalty
from .slicing import BehaviorSubgraph

log = logging.getLogger(__name__)

GATE_NAMES = ("Wz", "Wr", "Wh", "Uz", "Ur", "Uh", "bz", "br", "bh")


@dataclass
class GgnnParams:
    Wz: np.ndarray
    Wr: np.ndarray
    Wh: np.ndarray
    Uz: np.ndarray
    Ur: np.ndarray
    Uh: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bh: np.ndarray
    P: np.ndarray
    p_bias: np.ndarray
    steps: int

    @classmethod
    def init(cls, d: int, steps: int = 3, seed: int = 0) -> "GgnnParams":
        if steps < 1:
            raise ValueError("steps must be >= 1")
        rng = np.random.default_rng(seed)
        mats = {k: glorot(rng, (d, d)) for k in ("Wz", "Wr", "Wh", "Uz", "Ur", "Uh")}
        vecs = {k: np.zeros(d) for k in ("bz", "br", "bh")}
        return cls(**mats, **vecs, P=glorot(rng, (steps * d, d)), p_bias=np.zeros(d), steps=steps)

    @property
    def d(self) -> int:
        return self.Wz.shape[0]

    def arrays(self) -> dict:
        return {k: getattr(self, k) for k in GATE_NAMES + ("P", "p_bias")}

    def copy(self) -> "GgnnParams":
        return GgnnParams(**{k: v.copy() for k, v in self.arrays().items()}, steps=self.steps)


@dataclass
class GraphBatch:
    """Several graphs stacked into one disjoint union.

    ``pairs`` lists ``(i, j)`` with ``A[i, j] = 1`` in batch-global node indices.
    """

    features: np.ndarray
    pairs: np.ndarray
    graph_of: np.ndarray
    n_graphs: int

    @classmethod
    def from_graphs(cls, features_list, edges_list) -> "GraphBatch":
        feats, pairs, graph_of = [], [], []
        offset = 0
        for g, (h, edges) in enumerate(zip(features_list, edges_list)):
            h = np.asarray(h, dtype=np.float64)
            if h.shape[0] == 0:
                raise EmptyGraph(f"graph {g} has no nodes")
            sym = {(a, b) for a, b in edges if a != b} | {(b, a) for a, b in edges if a != b}
            pairs.extend((offset + a, offset + b) for a, b in sorted(sym))
            feats.append(h)
            graph_of.extend([g] * h.shape[0])
            offset += h.shape[0]
        if not feats:
            raise EmptyGraph("no graphs to encode")
        d = feats[0].shape[1]
        if any(f.shape[1] != d for f in feats):
            raise ShapeMismatch("node feature widths differ across graphs")
        return cls(
            np.vstack(feats),
            np.array(pairs, dtype=np.int64).reshape(-1, 2),
            np.array(graph_of, dtype=np.int64),
            len(feats),
        )

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    def adjacency_sparse(self):
        n = self.n_nodes
        data = np.ones(len(self.pairs))
        return sp.csr_matrix((data, (self.pairs[:, 0], self.pairs[:, 1])), shape=(n, n))

    def pooling_sparse(self):
        counts = np.bincount(self.graph_of, minlength=self.n_graphs).astype(np.float64)
        data = 1.0 / counts[self.graph_of]
        return sp.csr_matrix((data, (self.graph_of, np.arange(self.n_nodes))), shape=(self.n_graphs, self.n_nodes))


def _local_edges(cpg_nodes, edges):
    pos = {n.node_id: i for i, n in enumerate(cpg_nodes)}
    return [(pos[e.src], pos[e.dst]) for e in edges]


def adjacency(cpg: Cpg) -> np.ndarray:
    """Binary symmetric adjacency over all edge kinds, rows in ``cpg.nodes`` order."""
    n = len(cpg.nodes)
    a = np.zeros((n, n))
    for i, j in _local_edges(cpg.nodes, cpg.edges):
        if i != j:
            a[i, j] = a[j, i] = 1.0
    return a


def _check_shapes(H, params):
    if H.ndim != 2 or H.shape[1] != params.d:
        raise ShapeMismatch(f"node features {H.shape} do not match d={params.d}")


def _gru(m, H, params, mm):
    d = params.d
    gates_m = mm(m, np.hstack([params.Wz, params.Wr, params.Wh]))
    gates_h = mm(H, np.hstack([params.Uz, params.Ur]))
    z = sigmoid(gates_m[:, :d] + gates_h[:, :d] + params.bz)
    r = sigmoid(gates_m[:, d:2 * d] + gates_h[:, d:] + params.br)
    hh = np.tanh(gates_m[:, 2 * d:] + mm(r * H, params.Uh) + params.bh)
    return (1.0 - z) * H + z * hh, (z, r, hh)


def propagate(H, A, params: GgnnParams) -> np.ndarray:
    """One GRU propagation step with a dense adjacency matrix ``A``."""
    H = np.asarray(H, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    _check_shapes(H, params)
    if A.shape != (H.shape[0], H.shape[0]):
        raise ShapeMismatch(f"adjacency {A.shape} does not match {H.shape[0]} nodes")
    return _gru(A @ H, H, params, np.matmul)[0]


def forward(batch: GraphBatch, params: GgnnParams, exact: bool = True, keep_cache: bool = False):
    """Encode every graph in the batch; returns ``(X, cache)``."""
    H = batch.features
    _check_shapes(H, params)
    counts = np.bincount(batch.graph_of, minlength=batch.n_graphs).astype(np.float64)
    if exact:
        mm = rowstable_matmul
        src, dst = batch.pairs[:, 0], batch.pairs[:, 1]

        def aggregate(states):
            return ordered_segment_sum(states[dst], src, batch.n_nodes)

        def pool(states):
            return ordered_segment_sum(states, batch.graph_of, batch.n_graphs) / counts[:, None]
    else:
        mm = np.matmul
        A = batch.adjacency_sparse()
        S = batch.pooling_sparse()

        def aggregate(states):
            return A @ states

        def pool(states):
            return S @ states

    cache = {"steps": []} if keep_cache else None
    pooled = []
    for _ in range(params.steps):
        m = aggregate(H)
        H_next, gates = _gru(m, H, params, mm)
        if keep_cache:
            cache["steps"].append((H, m) + gates)
        H = H_next
        pooled.append(pool(H))
    concat = np.hstack(pooled)
    X = mm(concat, params.P) + params.p_bias
    if keep_cache:
        cache["concat"] = concat
        cache["batch"] = batch
    return X, cache


def backward(cache, dX, params: GgnnParams) -> dict:
    """Gradients of a scalar loss w.r.t. every GGNN parameter, given dL/dX."""
    batch = cache["batch"]
    d = params.d
    A_T = batch.adjacency_sparse().T.tocsr()
    S_T = batch.pooling_sparse().T.tocsr()
    grads = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    grads["P"] = cache["concat"].T @ dX
    grads["p_bias"] = dX.sum(axis=0)
    d_concat = dX @ params.P.T
    dH = np.zeros_like(batch.features)
    for t in reversed(range(params.steps)):
        H, m, z, r, hh = cache["steps"][t]
        dH = dH + S_T @ d_concat[:, t * d:(t + 1) * d]
        dz = dH * (hh - H)
        dhh = dH * z
        dH_prev = dH * (1.0 - z)
        da_h = dhh * (1.0 - hh * hh)
        rH = r * H
        grads["Wh"] += m.T @ da_h
        grads["Uh"] += rH.T @ da_h
        grads["bh"] += da_h.sum(axis=0)
        d_rH = da_h @ params.Uh.T
        dm = da_h @ params.Wh.T
        dH_prev += d_rH * r
        da_r = d_rH * H * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        grads["Wr"] += m.T @ da_r
        grads["Ur"] += H.T @ da_r
        grads["br"] += da_r.sum(axis=0)
        grads["Wz"] += m.T @ da_z
        grads["Uz"] += H.T @ da_z
        grads["bz"] += da_z.sum(axis=0)
        dm += da_r @ params.Wr.T + da_z @ params.Wz.T
        dH_prev += da_r @ params.Ur.T + da_z @ params.Uz.T
        dH = dH_prev + A_T @ dm
    return grads


# -- encoding ------------------------------------------------------------


def cpg_batch(cpgs, vocab: Vocabulary, table: EmbeddingTable) -> GraphBatch:
    feats, edges = [], []
    for cpg in cpgs:
        if not cpg.nodes:
            raise EmptyGraph(f"function {cpg.function_id} has no nodes")
        feats.append(embed_nodes(cpg, vocab, table))
        edges.append(_local_edges(cpg.nodes, cpg.edges))
    return GraphBatch.from_graphs(feats, edges)


def behavior_batch(subgraphs, cpgs_by_id, vocab, table) -> GraphBatch:
    feats, edges = [], []
    for sub in subgraphs:
        cpg = cpgs_by_id[sub.function_id]
        nodes = [cpg.node(i) for i in sorted(sub.node_ids)]
        if not nodes:
            raise EmptyGraph(f"behavior of {sub.function_id} has no nodes")
        feats.append(embed_nodes(cpg, vocab, table, [n.node_id for n in nodes]))
        edges.append(_local_edges(nodes, sub.edges))
    return GraphBatch.from_graphs(feats, edges)


def encode_function(cpg: Cpg, vocab, table, params: GgnnParams) -> np.ndarray:
    """Intra-function feature vector x in R^d."""
    return forward(cpg_batch([cpg], vocab, table), params)[0][0]


def encode_functions(cpgs, vocab, table, params: GgnnParams) -> np.ndarray:
    if not cpgs:
        return np.zeros((0, params.d))
    return forward(cpg_batch(cpgs, vocab, table), params)[0]


def encode_behavior(subgraph: BehaviorSubgraph, cpg: Cpg, vocab, table, params: GgnnParams) -> np.ndarray:
    """Behavior vector b: the same encoder run on the slice's induced subgraph."""
    return encode_behaviors([subgraph], {cpg.function_id: cpg}, vocab, table, params)[0]


def encode_behaviors(subgraphs, cpgs_by_id, vocab, table, params: GgnnParams) -> np.ndarray:
    if not subgraphs:
        return np.zeros((0, params.d))
    return forward(behavior_batch(subgraphs, cpgs_by_id, vocab, table), params)[0]


# -- training ------------------------------------------------------------


def intra_loss(batch, labels, params: GgnnParams, head_w, head_b, weight_decay, exact=False):
    """Loss of the logistic head on pooled features, and all gradients.

    Returns ``(loss, ggnn_grads, head_grads)``.
    """
    y = np.asarray(labels, dtype=np.float64)
    X, cache = forward(batch, params, exact=exact, keep_cache=True)
    p = sigmoid(X @ head_w + head_b)
    theta = {**params.arrays(), "head_w": head_w, "head_b": np.atleast_1d(head_b)}
    penalty, pgrads = l2_penalty(theta, weight_decay)
    g_logit = bce_logit_grad(p, y)
    grads = backward(cache, np.outer(g_logit, head_w), params)
    for k in grads:
        grads[k] += pgrads[k]
    head_grads = {"head_w": X.T @ g_logit + pgrads["head_w"], "head_b": np.array([g_logit.sum()]) + pgrads["head_b"]}
    return bce(p, y) + penalty, grads, head_grads


@dataclass
class IntraFit:
    params: GgnnParams
    head_w: np.ndarray
    head_b: float
    losses: list
    val_f: list
    best_epoch: int


def fit_intra(cpgs, labels, split, vocab, table, steps=3, config: TrainConfig = TrainConfig()) -> IntraFit:
    """Train the GGNN and its logistic head on the train split.

    ``split`` gives ``"train"``/``"val"``/``"test"`` per graph. Parameters
    are kept from the epoch with the best validation F-measure (ties go to
    the lower validation loss, then the earlier epoch).
    """
    labels = np.asarray(labels, dtype=np.float64)
    split = np.asarray(split)
    train_idx = np.flatnonzero(split == "train")
    val_idx = np.flatnonzero(split == "val")
    if len(train_idx) == 0 or len(np.unique(labels[train_idx])) < 2:
        raise DegenerateLabels("train split must contain both classes")
    params = GgnnParams.init(table.d, steps, config.seed)
    rng = np.random.default_rng(config.seed + 1)
    head_w = rng.normal(0.0, 1.0 / np.sqrt(table.d), size=table.d)
    head_b = np.zeros(1)

    train_batch = cpg_batch([cpgs[i] for i in train_idx], vocab, table)
    val_batch = cpg_batch([cpgs[i] for i in val_idx], vocab, table) if len(val_idx) else None
    y_train, y_val = labels[train_idx], labels[val_idx]

    def validate():
        if val_batch is None:
            return 0.0, 0.0
        X, _ = forward(val_batch, params, exact=False)
        p = sigmoid(X @ head_w + head_b[0])
        return f_measure(p >= 0.5, y_val), bce(p, y_val)

    theta = {**params.arrays(), "head_w": head_w, "head_b": head_b}
    opt = Adam(theta, config)
    best_f, best_loss = validate()
    best = (params.copy(), head_w.copy(), float(head_b[0]), 0)
    losses, val_f = [], [best_f]
    for epoch in range(config.epochs):
        loss, grads, head_grads = intra_loss(train_batch, y_train, params, head_w, head_b[0], config.weight_decay)
        opt.step({**grads, **head_grads}, config.lr_at(epoch))
        losses.append(loss)
        f, vloss = validate()
        val_f.append(f)
        if val_batch is not None and (f > best_f or (f == best_f and vloss < best_loss)):
            best_f, best_loss = f, vloss
            best = (params.copy(), head_w.copy(), float(head_b[0]), epoch + 1)
        log.debug("intra epoch %d loss %.5f val F %.4f", epoch, loss, f)
    if val_batch is None:
        best = (params.copy(), head_w.copy(), float(head_b[0]), config.epochs)
    return IntraFit(best[0], best[1], best[2], losses, val_f, best[3])


def train_intra(cpgs, labels, split, vocab, table, steps=3, config: TrainConfig = TrainConfig()) -> GgnnParams:
    return fit_intra(cpgs, labels, split, vocab, table, steps, config).params
