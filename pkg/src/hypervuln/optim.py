"""Adam with L2 weight decay and a step learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings shared by both training stages.

    ``gamma_reading`` picks how ``gamma`` is used: ``"lr_decay"`` multiplies
    the learning rate by ``gamma`` every ``decay_every`` epochs;
    ``"adam_beta1"`` uses it as Adam's first-moment coefficient and keeps the
    learning rate constant.
    """

    epochs: int = 200
    lr: float = 0.01
    gamma: float = 0.9
    gamma_reading: str = "lr_decay"
    decay_every: int = 1
    weight_decay: float = 5e-4
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.lr <= 0 or not 0 < self.gamma <= 1 or self.decay_every < 1:
            raise ValueError("lr, gamma and decay_every must be positive (gamma <= 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.gamma_reading not in ("lr_decay", "adam_beta1"):
            raise ValueError(f"unknown gamma_reading {self.gamma_reading!r}")

    @property
    def beta1(self) -> float:
        return self.gamma if self.gamma_reading == "adam_beta1" else 0.9

    def lr_at(self, epoch: int) -> float:
        if self.gamma_reading != "lr_decay":
            return self.lr
        return self.lr * self.gamma ** (epoch // self.decay_every)


class Adam:
    """Adam over a dict of named arrays, updated in place."""

    def __init__(self, params: dict, config: TrainConfig):
        self.params = params
        self.config = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict, lr: float):
        c = self.config
        self.t += 1
        b1, b2 = c.beta1, c.beta2
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p -= lr * m_hat / (np.sqrt(v_hat) + c.eps)


def l2_penalty(params: dict, weight_decay: float):
    """``weight_decay * sum ||p||^2`` and its gradient per parameter."""
    value = weight_decay * sum(float(np.sum(p * p)) for p in params.values())
    return value, {k: 2.0 * weight_decay * p for k, p in params.items()}


def bce(p, y):
    """Mean binary cross-entropy with probabilities clamped away from 0 and 1."""
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def bce_logit_grad(p, y):
    """Gradient of mean BCE w.r.t. the logits, given sigmoid outputs ``p``."""
    return (p - y) / len(y)
