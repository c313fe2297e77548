import numpy as np
import pytest

from hypervuln.cpg import Cpg, CpgEdge, CpgNode, pdg_as_cpg, pdg_view
from hypervuln.embedding import SkipgramConfig, build_corpus, train_skipgram
from hypervuln.errors import DegenerateLabels, EmptyGraph, ShapeMismatch
from hypervuln.ggnn import (
    GATE_NAMES,
    GgnnParams,
    GraphBatch,
    adjacency,
    backward,
    cpg_batch,
    encode_behavior,
    encode_function,
    fit_intra,
    forward,
    propagate,
)
from hypervuln.metrics import f_measure
from hypervuln.minic import parse_function
from hypervuln.optim import TrainConfig
from hypervuln.slicing import load_api_list, slice as slice_at, find_interest_points


def _sig(z):
    return 1.0 / (1.0 + np.exp(-z))


def _dense_encode(H, A, p):
    """Independent dense GGNN: T GRU steps, mean-pool steps 1..T, concat, project."""
    pooled = []
    for _ in range(p.steps):
        m = A @ H
        z = _sig(m @ p.Wz + H @ p.Uz + p.bz)
        r = _sig(m @ p.Wr + H @ p.Ur + p.br)
        h = np.tanh(m @ p.Wh + (r * H) @ p.Uh + p.bh)
        H = (1 - z) * H + z * h
        pooled.append(H.mean(axis=0))
    return np.concatenate(pooled) @ p.P + p.p_bias


def _random_params(d, steps, seed):
    p = GgnnParams.init(d, steps, seed)
    rng = np.random.default_rng(seed + 100)
    for k in ("bz", "br", "bh", "p_bias"):
        getattr(p, k)[:] = rng.normal(0, 0.3, size=d)
    return p


def test_adjacency_examples():
    single = Cpg("f", [CpgNode(0, "entry", (), 1)], [])
    assert adjacency(single).tolist() == [[0.0]]
    nodes = [CpgNode(0, "entry", (), 1), CpgNode(1, "statement", ("x",), 1)]
    a = adjacency(Cpg("f", nodes, [CpgEdge(0, 1, "CFG")]))
    assert a.tolist() == [[0, 1], [1, 0]]
    b = adjacency(Cpg("f", nodes, [CpgEdge(0, 1, "CFG"), CpgEdge(0, 1, "DDG"), CpgEdge(1, 0, "CDG")]))
    assert b.tolist() == [[0, 1], [1, 0]]


def test_adjacency_is_symmetric_binary(snippet_graphs):
    for cpg in snippet_graphs:
        a = adjacency(cpg)
        assert np.array_equal(a, a.T) and set(np.unique(a)) <= {0.0, 1.0} and not a.diagonal().any()


def test_zero_adjacency_is_a_message_free_update():
    p = _random_params(3, 1, 0)
    H = np.random.default_rng(1).normal(size=(4, 3))
    out = propagate(H, np.zeros((4, 4)), p)
    z = _sig(H @ p.Uz + p.bz)
    r = _sig(H @ p.Ur + p.br)
    h = np.tanh((r * H) @ p.Uh + p.bh)
    np.testing.assert_allclose(out, (1 - z) * H + z * h, rtol=0, atol=1e-14)


def test_saturated_update_gate_copies_candidate():
    p = _random_params(3, 1, 2)
    p.bz[:] = 50.0
    rng = np.random.default_rng(3)
    H = rng.normal(size=(4, 3))
    A = np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)
    m = A @ H
    r = _sig(m @ p.Wr + H @ p.Ur + p.br)
    h = np.tanh(m @ p.Wh + (r * H) @ p.Uh + p.bh)
    np.testing.assert_allclose(propagate(H, A, p), h, rtol=0, atol=1e-3)


def test_propagate_shape_errors():
    p = GgnnParams.init(3, 1)
    with pytest.raises(ShapeMismatch):
        propagate(np.zeros((2, 4)), np.zeros((2, 2)), p)
    with pytest.raises(ShapeMismatch):
        propagate(np.zeros((2, 3)), np.zeros((3, 3)), p)
    with pytest.raises(ValueError):
        GgnnParams.init(3, 0)


def test_empty_graph_errors():
    with pytest.raises(EmptyGraph):
        GraphBatch.from_graphs([np.zeros((0, 3))], [[]])
    with pytest.raises(EmptyGraph):
        GraphBatch.from_graphs([], [])


def test_gradients_match_finite_differences():
    d, steps = 3, 2
    rng = np.random.default_rng(4)
    batch = GraphBatch.from_graphs(
        [rng.normal(size=(4, d)), rng.normal(size=(2, d))],
        [[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], [(0, 1)]],
    )
    p = _random_params(d, steps, 5)
    R = rng.normal(size=(2, d))

    def loss(params):
        return float(np.sum(forward(batch, params, exact=False)[0] * R))

    _, cache = forward(batch, p, exact=False, keep_cache=True)
    grads = backward(cache, R, p)
    h = 1e-5
    for name, arr in p.arrays().items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss(p)
            arr[idx] = old - h
            down = loss(p)
            arr[idx] = old
            numeric = (up - down) / (2 * h)
            analytic = grads[name][idx]
            assert abs(numeric - analytic) <= 1e-4 * max(1.0, abs(numeric), abs(analytic)), (name, idx)


def _fixture():
    nodes = [CpgNode(0, "entry", (), 1), CpgNode(1, "statement", ("a", "=", "1"), 2),
             CpgNode(2, "statement", ("b", "=", "a"), 3)]
    cpg = Cpg("fx", nodes, [CpgEdge(0, 1, "CFG"), CpgEdge(1, 2, "CFG"), CpgEdge(1, 2, "DDG")])
    vocab, table = train_skipgram(build_corpus([cpg]), SkipgramConfig(d=4, epochs=3, seed=1))
    return cpg, vocab, table


def test_encode_function_matches_dense_oracle():
    cpg, vocab, table = _fixture()
    p = _random_params(4, 3, 6)
    H0 = np.stack([np.zeros(4), table.matrix[[vocab.lookup(t) for t in ("a", "=", "LIT_NUM")]].mean(0),
                   table.matrix[[vocab.lookup(t) for t in ("b", "=", "a")]].mean(0)])
    expected = _dense_encode(H0, adjacency(cpg), p)
    np.testing.assert_allclose(encode_function(cpg, vocab, table, p), expected, rtol=0, atol=1e-10)
    fast = forward(cpg_batch([cpg], vocab, table), p, exact=False)[0][0]
    np.testing.assert_allclose(fast, expected, rtol=0, atol=1e-10)


def test_single_node_graph():
    cpg = Cpg("one", [CpgNode(0, "statement", ("a",), 1)], [])
    vocab, table = train_skipgram([["a", "b"]], SkipgramConfig(d=4, epochs=1))
    p = _random_params(4, 2, 1)
    h = table.matrix[vocab.lookup("a")][None, :]
    expected = _dense_encode(h, np.zeros((1, 1)), p)
    np.testing.assert_allclose(encode_function(cpg, vocab, table, p), expected, rtol=0, atol=1e-12)


def test_node_permutation_gives_identical_output(snippet_graphs, small_embedding):
    vocab, table = small_embedding
    p = _random_params(6, 3, 8)
    rng = np.random.default_rng(9)
    for cpg in snippet_graphs:
        x = encode_function(cpg, vocab, table, p)
        for _ in range(20):
            order = rng.permutation(len(cpg.nodes))
            shuffled = Cpg(cpg.function_id, [cpg.nodes[i] for i in order],
                           [cpg.edges[i] for i in rng.permutation(len(cpg.edges))])
            assert np.array_equal(encode_function(shuffled, vocab, table, p), x)


def test_relabeled_batch_is_bit_identical():
    rng = np.random.default_rng(10)
    p = _random_params(5, 3, 11)
    for _ in range(30):
        n = int(rng.integers(2, 12))
        H = rng.normal(size=(n, 5))
        edges = [(a, b) for a in range(n) for b in range(n) if a != b and rng.random() < 0.3]
        perm = rng.permutation(n)
        inv = np.argsort(perm)
        x1 = forward(GraphBatch.from_graphs([H], [edges]), p)[0]
        x2 = forward(GraphBatch.from_graphs([H[perm]], [[(inv[a], inv[b]) for a, b in edges]]), p)[0]
        assert np.array_equal(x1, x2)


def test_encode_behavior_on_whole_pdg():
    cpg = parse_function("void f(int x){ x = x * 2; }")
    vocab, table = train_skipgram(build_corpus([cpg]), SkipgramConfig(d=4, epochs=1))
    p = _random_params(4, 2, 3)
    pdg = pdg_view(cpg)
    [point] = find_interest_points(pdg, cpg, load_api_list())
    sub = slice_at(pdg, point)
    assert sub.node_ids == set(pdg.nodes)
    b = encode_behavior(sub, cpg, vocab, table, p)
    assert np.array_equal(b, encode_function(pdg_as_cpg(pdg, cpg), vocab, table, p))
    twin = parse_function("void g(int x){ x = x * 2; }")
    sub2 = slice_at(pdg_view(twin), point)
    assert np.array_equal(encode_behavior(sub2, twin, vocab, table, p), b)


# -- training ------------------------------------------------------------


def _separable_corpus(n=40):
    cpgs, labels = [], []
    for i in range(n):
        bad = i % 2 == 0
        call = "strcpy(d, s);" if bad else "puts(s);"
        cpgs.append(parse_function(f"void f{i}(char *d, char *s){{ int k = {i}; {call} }}", f"f{i}"))
        labels.append(int(bad))
    split = np.array(["train"] * 30 + ["val"] * 5 + ["test"] * 5)
    vocab, table = train_skipgram(build_corpus(cpgs), SkipgramConfig(d=8, epochs=5, seed=0))
    return cpgs, np.array(labels), split, vocab, table


def test_separable_corpus_reaches_high_train_f():
    cpgs, labels, split, vocab, table = _separable_corpus()
    fit = fit_intra(cpgs, labels, split, vocab, table, steps=2, config=TrainConfig(epochs=200))
    train = [c for c, s in zip(cpgs, split) if s == "train"]
    X = forward(cpg_batch(train, vocab, table), fit.params)[0]
    p = _sig(X @ fit.head_w + fit.head_b)
    assert f_measure(p >= 0.5, labels[split == "train"]) >= 0.99


def test_zero_epochs_and_determinism():
    cpgs, labels, split, vocab, table = _separable_corpus(20)
    split = np.array(["train"] * 14 + ["val"] * 3 + ["test"] * 3)
    config = TrainConfig(epochs=0, seed=4)
    fit = fit_intra(cpgs, labels, split, vocab, table, steps=2, config=config)
    init = GgnnParams.init(8, 2, 4)
    assert all(np.array_equal(fit.params.arrays()[k], init.arrays()[k]) for k in init.arrays())
    assert fit.best_epoch == 0
    config = TrainConfig(epochs=15, seed=4)
    a = fit_intra(cpgs, labels, split, vocab, table, steps=2, config=config)
    b = fit_intra(cpgs, labels, split, vocab, table, steps=2, config=config)
    for k in GATE_NAMES + ("P", "p_bias"):
        assert np.array_equal(a.params.arrays()[k], b.params.arrays()[k])
    assert a.losses == b.losses


def test_single_class_train_split_is_rejected():
    cpgs, labels, split, vocab, table = _separable_corpus(20)
    split = np.array(["train" if y == 1 else "val" for y in labels])
    with pytest.raises(DegenerateLabels):
        fit_intra(cpgs, labels, split, vocab, table)
