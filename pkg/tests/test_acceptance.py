"""Acceptance suite: one check per primary criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria". The end-to-end checks are marked slow.
Run on its own with ``python3 tests/test_acceptance.py``.
"""

import time
from itertools import product

import numpy as np
import pytest

from conftest import random_program, record_criterion
from hypervuln.clustering import Hyperedge
from hypervuln.cpg import Cpg, CpgEdge, Pdg
from hypervuln.detector import HgnnParams, forward, loss, loss_and_grads
from hypervuln.embedding import SkipgramConfig, build_corpus, train_skipgram
from hypervuln.ggnn import GgnnParams, GraphBatch, encode_function, intra_loss
from hypervuln.hypergraph import degrees, from_dense, hyperedge_conv, incidence, normalized_operator, spectral_oracle
from hypervuln.metrics import evaluate
from hypervuln.minic import parse_function
from hypervuln.slicing import InterestPoint, slice
from hypervuln.synthetic import benchmark_config, manifest_records, planted_corpus
from hypervuln.workbench import DatasetManifest, run_pipeline


def _random_hypergraph(rng, max_n=50, max_k=20):
    n = int(rng.integers(1, max_n + 1))
    ids = list(range(n))
    edges = []
    for c in range(int(rng.integers(0, max_k + 1))):
        members = tuple(i for i in ids if rng.random() < rng.uniform(0.02, 0.4))
        if members:
            edges.append(Hyperedge(c, members))
    return incidence(edges, ids)


def _dense_theta(H):
    H = np.asarray(H, dtype=float)
    Dv_is = np.diag(1 / np.sqrt(H.sum(1)))
    return Dv_is @ H @ np.linalg.inv(np.diag(H.sum(0))) @ H.T @ Dv_is


def test_hypergraph_algebra_fixture():
    start = time.perf_counter()
    hg = from_dense([[1, 0], [1, 1], [0, 1]])
    dv, de = degrees(hg)
    theta = normalized_operator(hg).theta
    r = 1 / (2 * np.sqrt(2))
    hand = np.array([[0.5, r, 0.0], [r, 0.5, r], [0.0, r, 0.5]])
    err = float(np.max(np.abs(theta - hand)))
    elapsed = time.perf_counter() - start
    ok = dv.tolist() == [1, 2, 1] and de.tolist() == [2, 2] and err <= 1e-12 and elapsed < 1.0
    record_criterion("hypergraph algebra fixture", ok, f"Dv={dv.tolist()} De={de.tolist()} max|theta-hand|={err:.1e} in {elapsed:.3f}s")
    assert ok


def test_laplacian_is_psd():
    start = time.perf_counter()
    rng = np.random.default_rng(100)
    worst = np.inf
    for _ in range(150):
        values, _ = spectral_oracle(normalized_operator(_random_hypergraph(rng)).delta)
        worst = min(worst, float(values.min()))
    elapsed = time.perf_counter() - start
    ok = worst >= -1e-8 and elapsed < 10.0
    record_criterion("PSD property", ok, f"150 hypergraphs, min eigenvalue {worst:.2e} in {elapsed:.2f}s")
    assert ok


def test_convolution_oracle():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(80):
        hg = _random_hypergraph(rng)
        X = rng.normal(size=(hg.n_vertices, 6))
        beta = rng.normal(size=(6, 6))
        for act in (True, False):
            dense = _dense_theta(hg.dense()) @ X @ beta
            dense = np.maximum(dense, 0) if act else dense
            worst = max(worst, float(np.max(np.abs(hyperedge_conv(X, hg, beta, act) - dense))))
    ok = worst <= 1e-12
    record_criterion("convolution oracle equivalence", ok, f"80 instances, max abs diff {worst:.1e}")
    assert ok


def _fd_check(arrays, value, grads, h=1e-5):
    worst = 0.0
    for name, arr in arrays.items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = value()
            arr[idx] = old - h
            down = value()
            arr[idx] = old
            numeric = (up - down) / (2 * h)
            worst = max(worst, abs(numeric - grads[name][idx]) / max(1.0, abs(numeric), abs(grads[name][idx])))
    return worst


def test_gradient_correctness():
    rng = np.random.default_rng(102)
    d = 3
    # GGNN cell, projection and the intra logistic head
    batch = GraphBatch.from_graphs([rng.normal(size=(4, d)), rng.normal(size=(3, d))],
                                   [[(0, 1), (1, 2), (2, 3), (3, 1)], [(0, 2)]])
    gp = GgnnParams.init(d, 2, 1)
    for k in ("bz", "br", "bh", "p_bias"):
        getattr(gp, k)[:] = rng.normal(0, 0.3, size=d)
    head = {"head_w": rng.normal(size=d), "head_b": np.array([0.2])}
    y = np.array([1.0, 0.0])

    def intra_value():
        return intra_loss(batch, y, gp, head["head_w"], head["head_b"][0], 5e-4)[0]

    _, g_ggnn, g_head = intra_loss(batch, y, gp, head["head_w"], head["head_b"][0], 5e-4)
    worst_intra = max(_fd_check(gp.arrays(), intra_value, g_ggnn), _fd_check(head, intra_value, g_head))

    # HGNN filters and its logistic head
    hg = from_dense([[1, 0, 0], [1, 1, 0], [0, 1, 1], [0, 0, 1], [1, 0, 1]])
    X = rng.normal(size=(5, d))
    labels = np.array([1, 0, 1, 1, 0])
    mask = np.array([True, True, False, True, True])
    hp = HgnnParams.init(d, 2, 2)
    b = np.array([0.1])

    def hgnn_value():
        hp.b = float(b[0])
        return loss(forward(X, hg, hp), labels, mask, hp, 5e-4)

    hp.b = float(b[0])
    _, g_hgnn = loss_and_grads(X, hg, labels, mask, hp, 5e-4)
    worst_hgnn = _fd_check({**hp.arrays(), "b": b}, hgnn_value, g_hgnn)
    worst = max(worst_intra, worst_hgnn)
    ok = worst <= 1e-4
    record_criterion("gradient correctness", ok,
                     f"max rel err GGNN+head {worst_intra:.1e}, HGNN+head {worst_hgnn:.1e}")
    assert ok


def test_slicing_oracle():
    rng = np.random.default_rng(103)
    mismatches = 0
    for _ in range(250):
        n = int(rng.integers(1, 21))
        arcs = {(a, b) for a in range(n) for b in range(n) if a != b and rng.random() < rng.uniform(0, 0.3)}
        pdg = Pdg("g", tuple(range(n)), tuple(sorted(CpgEdge(a, b, "DDG") for a, b in arcs)))
        A = np.zeros((n, n), dtype=np.int64)
        for a, b in arcs:
            A[a, b] = 1
        R = np.eye(n, dtype=np.int64)
        for _ in range(n):
            R = np.minimum(R + R @ A, 1)
        for p in range(n):
            expected = set(np.flatnonzero(R[p])) | set(np.flatnonzero(R[:, p]))
            mismatches += slice(pdg, InterestPoint(p, "array")).node_ids != expected
    ok = mismatches == 0
    record_criterion("slicing oracle", ok, f"250 random digraphs (n<=20), {mismatches} mismatching slices")
    assert ok


def test_permutation_properties():
    rng = np.random.default_rng(104)
    graphs = [parse_function(random_program(rng, 12), f"p{i}") for i in range(30)]
    vocab, table = train_skipgram(build_corpus(graphs), SkipgramConfig(d=6, epochs=2))
    params = GgnnParams.init(6, 3, 5)
    bad_encode = 0
    for cpg in graphs:
        x = encode_function(cpg, vocab, table, params)
        for _ in range(5):
            order = rng.permutation(len(cpg.nodes))
            shuffled = Cpg(cpg.function_id, [cpg.nodes[i] for i in order], list(reversed(cpg.edges)))
            bad_encode += not np.array_equal(encode_function(shuffled, vocab, table, params), x)
    bad_forward = 0
    for _ in range(50):
        hg = _random_hypergraph(rng, 40, 12)
        X = rng.normal(size=(hg.n_vertices, 6))
        hp = HgnnParams.init(6, 2, int(rng.integers(100)))
        perm = rng.permutation(hg.n_vertices)
        bad_forward += not np.array_equal(forward(X[perm], hg.permuted(perm), hp), forward(X, hg, hp)[perm])
    ok = bad_encode == 0 and bad_forward == 0
    record_criterion("permutation properties", ok,
                     f"encode_function 150 relabelings, {bad_encode} unequal; forward 50 permutations, {bad_forward} unequal")
    assert ok


def test_metrics_suite():
    failures = 0
    cases = 0
    for n in range(6):
        for pred, true in product(product([0, 1], repeat=n), repeat=2):
            m = evaluate(pred, true)
            tp = sum(p & t for p, t in zip(pred, true))
            fp = sum(p & (1 - t) for p, t in zip(pred, true))
            fn = sum((1 - p) & t for p, t in zip(pred, true))
            recall = tp / (tp + fn) if tp + fn else 0.0
            f = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
            failures += (m.tp, m.fp, m.fn, m.n, m.recall, m.f_measure) != (tp, fp, fn, n, recall, f)
            cases += 1
    worked = evaluate([1, 1, 1, 0, 0, 0, 0, 0, 0, 0], [1, 1, 0, 1, 0, 0, 0, 0, 0, 0])
    ok = failures == 0 and worked.recall == 2 / 3 and worked.f_measure == 2 / 3
    record_criterion("metrics unit suite", ok, f"{cases} enumerated confusions incl. zero denominators, {failures} wrong")
    assert ok


@pytest.fixture(scope="module")
def benchmark_run():
    manifest = DatasetManifest.from_records(manifest_records(planted_corpus(400, 0)))
    config = benchmark_config(0)
    start = time.perf_counter()
    bundle, report = run_pipeline(manifest, config)
    return manifest, config, report, time.perf_counter() - start


@pytest.mark.slow
def test_planted_benchmark(benchmark_run):
    _, _, report, elapsed = benchmark_run
    f = report.metrics["test"].f_measure
    base = report.baseline["test"].f_measure
    ok = f >= 0.85 and f - base >= 0.05 and elapsed < 300
    record_criterion("end-to-end planted benchmark", ok,
                     f"test F {f:.3f} vs intra-only baseline {base:.3f} (margin {100 * (f - base):+.1f} pts) in {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_reproducibility(benchmark_run):
    manifest, config, report, _ = benchmark_run
    _, again = run_pipeline(manifest, config)
    ok = again.to_json().encode() == report.to_json().encode()
    record_criterion("reproducibility", ok, f"two runs, reports byte-identical: {ok} (sha256 {report.bundle_sha256[:12]})")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
