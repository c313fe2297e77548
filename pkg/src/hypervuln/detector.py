"""Hypergraph network over function features, trained transductively.

Forward pass with ``L`` convolution layers::

    Z_1 = ReLU(theta X beta_1)
    ...
    Z_L = theta Z_{L-1} beta_L          (no activation on the last layer)
    p   = sigmoid(Z_L w + b)

Every function takes part in propagation; only the training rows enter the
loss. ``layers=0`` reduces the model to logistic regression on ``X``, which
serves as the intra-features-only baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._numeric import glorot, rowstable_matmul, sigmoid
from .errors import DegenerateLabels, EmptyMask, ShapeMismatch
from .hypergraph import Hypergraph, Propagator
from .metrics import Metrics, evaluate, f_measure
from .optim import Adam, TrainConfig, bce, bce_logit_grad, l2_penalty

log = logging.getLogger(__name__)

__all__ = ["HgnnParams", "FeatureScaler", "TrainConfig", "forward", "loss", "loss_and_grads", "train", "fit", "evaluate", "Metrics"]


@dataclass
class HgnnParams:
    betas: list
    w: np.ndarray
    b: float

    @classmethod
    def init(cls, d: int, layers: int = 2, seed: int = 0) -> "HgnnParams":
        rng = np.random.default_rng(seed)
        betas = [glorot(rng, (d, d)) for _ in range(layers)]
        w = rng.normal(0.0, 1.0 / np.sqrt(d), size=d)
        return cls(betas, w, 0.0)

    @property
    def layers(self) -> int:
        return len(self.betas)

    def arrays(self) -> dict:
        out = {f"beta{i}": beta for i, beta in enumerate(self.betas)}
        out["w"] = self.w
        return out

    def copy(self) -> "HgnnParams":
        return HgnnParams([beta.copy() for beta in self.betas], self.w.copy(), float(self.b))

    def equals(self, other: "HgnnParams") -> bool:
        return (
            self.layers == other.layers
            and all(np.array_equal(a, b) for a, b in zip(self.betas, other.betas))
            and np.array_equal(self.w, other.w)
            and self.b == other.b
        )


@dataclass(frozen=True)
class FeatureScaler:
    """Per-column standardization fitted on the training rows.

    Intra features sit at large offsets with small spread, which slows a
    fixed-learning-rate optimizer badly; centering and scaling fixes that
    without changing what a linear head can express.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "FeatureScaler":
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] == 0:
            raise EmptyMask("cannot fit a scaler on zero rows")
        scale = X.std(axis=0)
        scale[scale < 1e-12] = 1.0
        return cls(X.mean(axis=0), scale)

    @classmethod
    def identity(cls, d: int) -> "FeatureScaler":
        return cls(np.zeros(d), np.ones(d))

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


def _propagator(hg, propagator):
    if propagator is not None:
        return propagator
    return Propagator(hg)


def forward(X, hg: Hypergraph, params: HgnnParams, propagator=None, keep_cache=False):
    """Vulnerability probability per function; with ``keep_cache`` also returns the cache."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != hg.n_vertices or X.shape[1] != params.w.shape[0]:
        raise ShapeMismatch(f"features {X.shape} do not fit {hg.n_vertices} vertices / d={params.w.shape[0]}")
    prop = _propagator(hg, propagator) if params.layers else None
    Z = X
    cache = []
    for i, beta in enumerate(params.betas):
        if beta.shape != (Z.shape[1], Z.shape[1]):
            raise ShapeMismatch(f"layer {i} filter {beta.shape} for width {Z.shape[1]}")
        S = prop.apply(Z)
        A = rowstable_matmul(S, beta)
        last = i == params.layers - 1
        cache.append((S, A, last))
        Z = A if last else np.maximum(A, 0.0)
    logits = rowstable_matmul(Z, params.w[:, None])[:, 0] + params.b
    p = sigmoid(logits)
    if keep_cache:
        return p, {"layers": cache, "Z": Z, "prop": prop}
    return p


def _mask_targets(labels, mask):
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("loss mask selects no functions")
    return np.asarray(labels, dtype=np.float64), mask


def loss(p, labels, mask, params: HgnnParams | None = None, weight_decay: float = 0.0) -> float:
    """Mean BCE over the masked functions plus ``weight_decay * ||params||^2``."""
    y, mask = _mask_targets(labels, mask)
    value = bce(np.asarray(p)[mask], y[mask])
    if params is not None and weight_decay:
        theta = {**params.arrays(), "b": np.array([params.b])}
        value += l2_penalty(theta, weight_decay)[0]
    return value


def loss_and_grads(X, hg, labels, mask, params: HgnnParams, weight_decay: float, propagator=None):
    y, mask = _mask_targets(labels, mask)
    p, cache = forward(X, hg, params, propagator, keep_cache=True)
    theta = {**params.arrays(), "b": np.array([params.b])}
    penalty, pgrads = l2_penalty(theta, weight_decay)
    value = bce(p[mask], y[mask]) + penalty

    g_logit = np.zeros_like(p)
    g_logit[mask] = bce_logit_grad(p[mask], y[mask])
    grads = {"w": cache["Z"].T @ g_logit + pgrads["w"], "b": np.array([g_logit.sum()]) + pgrads["b"]}
    dZ = np.outer(g_logit, params.w)
    for i in reversed(range(params.layers)):
        S, A, last = cache["layers"][i]
        dA = dZ if last else dZ * (A > 0)
        grads[f"beta{i}"] = S.T @ dA + pgrads[f"beta{i}"]
        if i:
            dZ = cache["prop"].apply_transpose(dA @ params.betas[i].T)
    return value, grads


@dataclass
class Fit:
    params: HgnnParams
    initial: HgnnParams
    losses: list = field(default_factory=list)
    val_f: list = field(default_factory=list)
    best_epoch: int = 0


def fit(X, hg: Hypergraph, labels, split, config: TrainConfig = TrainConfig(), layers: int = 2,
        threshold: float = 0.5) -> Fit:
    """Full-batch training; keeps the parameters with the best validation F-measure.

    Ties on validation F-measure go to the lower validation loss, then to the
    earlier epoch.
    """
    labels = np.asarray(labels, dtype=np.float64)
    split = np.asarray(split)
    train_mask, val_mask = split == "train", split == "val"
    if not train_mask.any() or len(np.unique(labels[train_mask])) < 2:
        raise DegenerateLabels("train split must contain both classes")
    X = np.asarray(X, dtype=np.float64)
    params = HgnnParams.init(X.shape[1], layers, config.seed)
    initial = params.copy()
    prop = Propagator(hg) if layers else None

    def validate():
        if not val_mask.any():
            return 0.0, 0.0
        p = forward(X, hg, params, prop)
        return f_measure(p[val_mask] >= threshold, labels[val_mask]), bce(p[val_mask], labels[val_mask])

    b_arr = np.array([params.b])
    theta = {**params.arrays(), "b": b_arr}
    opt = Adam(theta, config)
    best_f, best_loss = validate()
    result = Fit(params.copy(), initial, val_f=[best_f])
    for epoch in range(config.epochs):
        params.b = float(b_arr[0])
        value, grads = loss_and_grads(X, hg, labels, train_mask, params, config.weight_decay, prop)
        opt.step(grads, config.lr_at(epoch))
        params.b = float(b_arr[0])
        result.losses.append(value)
        f, vloss = validate()
        result.val_f.append(f)
        if val_mask.any() and (f > best_f or (f == best_f and vloss < best_loss)):
            best_f, best_loss = f, vloss
            result.params, result.best_epoch = params.copy(), epoch + 1
        log.debug("hgnn epoch %d loss %.5f val F %.4f", epoch, value, f)
    if not val_mask.any():
        result.params, result.best_epoch = params.copy(), config.epochs
    return result


def train(X, hg: Hypergraph, labels, split, config: TrainConfig = TrainConfig(), layers: int = 2) -> HgnnParams:
    return fit(X, hg, labels, split, config, layers).params


def predict(p, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(p) >= threshold).astype(np.int64)


def split_metrics(p, labels, split, threshold: float = 0.5) -> dict:
    split = np.asarray(split)
    labels = np.asarray(labels)
    pred = predict(p, threshold)
    return {name: evaluate(pred[split == name], labels[split == name]) for name in ("train", "val", "test")}
