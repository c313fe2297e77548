"""Order-independent numeric kernels.

BLAS products and scatter-adds round differently depending on row position
and accumulation order, so a permuted input does not give a bitwise-permuted
output. The kernels here fix the accumulation order from the data alone,
which makes graph encodings exactly invariant to node relabeling.
"""

import numpy as np


def rowstable_matmul(x, w):
    """``x @ w`` where each output row depends only on the matching input row.

    Accumulates over the inner dimension in a fixed order with elementwise
    ufuncs, so permuting the rows of ``x`` permutes the result bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"cannot multiply {x.shape} by {w.shape}")
    out = np.zeros((x.shape[0], w.shape[1]))
    for k in range(x.shape[1]):
        out += x[:, k, None] * w[k]
    return out


def ordered_segment_sum(values, segments, n_segments):
    """Sum rows of ``values`` into ``n_segments`` buckets.

    Inside every bucket each column is summed in ascending value order, so
    the result does not depend on the order in which rows are listed.
    """
    values = np.asarray(values, dtype=np.float64)
    segments = np.asarray(segments, dtype=np.int64)
    out = np.zeros((n_segments, values.shape[1]))
    if len(segments) == 0:
        return out
    order = np.argsort(segments, kind="stable")
    counts = np.bincount(segments, minlength=n_segments)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    for c in np.unique(counts[counts > 0]):
        segs = np.flatnonzero(counts == c)
        idx = order[starts[segs][:, None] + np.arange(c)[None, :]]
        block = np.sort(values[idx], axis=1)
        acc = block[:, 0].copy()
        for j in range(1, c):
            acc += block[:, j]
        out[segs] = acc
    return out


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[-1]))
    return rng.uniform(-limit, limit, size=shape)
