"""Skip-gram token embeddings and node vectors.

Each CPG node contributes one "sentence": its tokens with literals folded into
``LIT_NUM`` / ``LIT_STR``. Vectors are trained with skip-gram and negative
sampling using mini-batched SGD; a node embeds as the mean of its token
vectors.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._numeric import sigmoid
from .cpg import Cpg, CpgNode
from .errors import EmptyCorpus

log = logging.getLogger(__name__)

OOV = "<unk>"
LIT_NUM = "LIT_NUM"
LIT_STR = "LIT_STR"


def normalize_token(tok: str) -> str:
    if tok[:1].isdigit() or (tok[:1] == "." and tok[1:2].isdigit()):
        return LIT_NUM
    if tok[:1] in ("'", '"'):
        return LIT_STR
    return tok


@dataclass(frozen=True)
class SkipgramConfig:
    d: int = 256
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    seed: int = 0
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    batch_size: int = 256

    def __post_init__(self):
        for name in ("d", "window", "negatives", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.min_learning_rate <= 0:
            raise ValueError("learning rates must be positive")


@dataclass
class Vocabulary:
    index: dict[str, int]

    @classmethod
    def from_corpus(cls, corpus) -> "Vocabulary":
        counts = Counter(tok for seq in corpus for tok in seq)
        counts.pop(OOV, None)
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        return cls({OOV: 0, **{tok: i + 1 for i, tok in enumerate(ordered)}})

    def __len__(self):
        return len(self.index)

    def __contains__(self, tok):
        return tok in self.index

    def lookup(self, tok) -> int:
        return self.index.get(tok, self.index[OOV])

    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.get)


@dataclass
class EmbeddingTable:
    matrix: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.matrix.shape[1]


def build_corpus(cpgs) -> list[list[str]]:
    """One normalized token sequence per node, across all given graphs."""
    return [[normalize_token(t) for t in node.tokens] for cpg in cpgs for node in cpg.nodes]


def _pairs(corpus, vocab, window):
    centers, contexts = [], []
    for seq in corpus:
        ids = [vocab.lookup(t) for t in seq]
        for i, c in enumerate(ids):
            lo, hi = max(0, i - window), min(len(ids), i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(c)
                    contexts.append(ids[j])
    return np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64)


def train_skipgram(corpus, config: SkipgramConfig = SkipgramConfig()):
    """Train skip-gram with negative sampling; returns ``(Vocabulary, EmbeddingTable)``.

    Deterministic for a fixed ``config.seed``.
    """
    if sum(len(seq) for seq in corpus) == 0:
        raise EmptyCorpus("corpus contains no tokens")
    vocab = Vocabulary.from_corpus(corpus)
    rng = np.random.default_rng(config.seed)
    V, d = len(vocab), config.d
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(V, d))
    w_out = np.zeros((V, d))

    counts = np.zeros(V)
    for seq in corpus:
        for tok in seq:
            counts[vocab.lookup(tok)] += 1
    noise = counts ** 0.75
    noise /= noise.sum()
    noise_cdf = np.cumsum(noise)
    noise_cdf[-1] = 1.0

    centers, contexts = _pairs(corpus, vocab, config.window)
    history = []
    n_pairs = len(centers)
    if n_pairs == 0:
        log.warning("corpus has no token pairs; embeddings stay at initialization")
        return vocab, EmbeddingTable(w_in, history)

    total_steps = config.epochs * -(-n_pairs // config.batch_size)
    step = 0
    k = config.negatives
    for epoch in range(config.epochs):
        order = rng.permutation(n_pairs)
        epoch_loss = 0.0
        for start in range(0, n_pairs, config.batch_size):
            batch = order[start:start + config.batch_size]
            lr = max(config.min_learning_rate, config.learning_rate * (1.0 - step / total_steps))
            step += 1
            c, o = centers[batch], contexts[batch]
            neg = np.searchsorted(noise_cdf, rng.random((len(batch), k)), side="right")
            neg = np.minimum(neg, V - 1)
            v = w_in[c]
            u_pos = w_out[o]
            u_neg = w_out[neg]
            s_pos = sigmoid(np.einsum("bd,bd->b", v, u_pos))
            s_neg = sigmoid(np.einsum("bd,bkd->bk", v, u_neg))
            epoch_loss -= np.sum(np.log(s_pos + 1e-12)) + np.sum(np.log(1.0 - s_neg + 1e-12))
            g_pos = s_pos - 1.0
            grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", s_neg, u_neg)
            np.add.at(w_out, o, -lr * g_pos[:, None] * v)
            np.add.at(w_out, neg.ravel(), -lr * (s_neg[:, :, None] * v[:, None, :]).reshape(-1, d))
            np.add.at(w_in, c, -lr * grad_v)
        history.append(epoch_loss / n_pairs)
        log.debug("skip-gram epoch %d loss %.5f", epoch, history[-1])
    return vocab, EmbeddingTable(w_in, history)


def embed_tokens(tokens, vocab: Vocabulary, table: EmbeddingTable) -> np.ndarray:
    if not tokens:
        return np.zeros(table.d)
    rows = [vocab.lookup(normalize_token(t)) for t in tokens]
    return table.matrix[rows].mean(axis=0)


def embed_node(node: CpgNode, vocab: Vocabulary, table: EmbeddingTable) -> np.ndarray:
    """Mean of the node's token vectors; the zero vector for token-less nodes."""
    return embed_tokens(node.tokens, vocab, table)


def embed_nodes(cpg: Cpg, vocab, table, node_ids=None) -> np.ndarray:
    nodes = cpg.nodes if node_ids is None else [cpg.node(i) for i in node_ids]
    if not nodes:
        return np.zeros((0, table.d))
    return np.stack([embed_node(n, vocab, table) for n in nodes])
