"""Confusion counts, recall, precision and F-measure."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import LengthMismatch


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def f_measure(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(recall=self.recall, precision=self.precision, f_measure=self.f_measure, n=self.n)
        return out


def evaluate(predictions, labels) -> Metrics:
    """Count outcomes for binary predictions against binary labels (1 = vulnerable)."""
    pred = np.asarray(predictions).astype(bool).ravel()
    true = np.asarray(labels).astype(bool).ravel()
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.size} predictions for {true.size} labels")
    return Metrics(
        tp=int(np.sum(pred & true)),
        fp=int(np.sum(pred & ~true)),
        fn=int(np.sum(~pred & true)),
        tn=int(np.sum(~pred & ~true)),
    )


def f_measure(predictions, labels) -> float:
    return evaluate(predictions, labels).f_measure
