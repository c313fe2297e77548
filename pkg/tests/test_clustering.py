from itertools import product

import numpy as np

from hypervuln.clustering import ClusterAssignment, assign_new, build_hyperedges, kmeans, sse


def test_single_cluster_is_the_mean():
    X = np.random.default_rng(0).normal(size=(9, 3))
    centroids, assignment = kmeans(X, 1)
    assert centroids.shape == (1, 3)
    np.testing.assert_allclose(centroids[0], X.mean(axis=0), rtol=0, atol=1e-14)
    assert set(assignment.clusters.tolist()) == {0}


def _best_two_partition(X):
    best, best_sse = None, np.inf
    for mask in product([0, 1], repeat=len(X)):
        labels = np.array(mask)
        if labels.min() == labels.max():
            continue
        cost = sum(np.sum((X[labels == k] - X[labels == k].mean(0)) ** 2) for k in (0, 1))
        if cost < best_sse - 1e-12:
            best, best_sse = labels, cost
    return best


def _same_partition(a, b):
    return all((a[i] == a[j]) == (b[i] == b[j]) for i in range(len(a)) for j in range(len(a)))


def test_two_separated_triples_are_recovered():
    X = np.array([[0, 0], [0.5, 0.2], [0.1, 0.6], [10, 10], [10.4, 9.8], [9.7, 10.3]])
    truth = _best_two_partition(X)
    assert _same_partition(truth, [0, 0, 0, 1, 1, 1])
    for seed in range(5):
        _, assignment = kmeans(X, 2, seed=seed)
        assert _same_partition(assignment.clusters, truth)


def test_brute_force_on_random_six_point_sets():
    rng = np.random.default_rng(1)
    for _ in range(30):
        X = np.vstack([rng.normal(0, 0.5, size=(3, 2)), rng.normal(8, 0.5, size=(3, 2))])[rng.permutation(6)]
        _, assignment = kmeans(X, 2, seed=int(rng.integers(100)))
        assert _same_partition(assignment.clusters, _best_two_partition(X))


def test_k_at_least_distinct_gives_zero_sse():
    X = np.array([[1.0, 2.0], [3.0, 4.0], [1.0, 2.0], [5.0, 5.0]])
    for K in (3, 4, 10):
        centroids, assignment = kmeans(X, K)
        assert len(centroids) == 3
        assert sse(X, centroids, assignment.clusters) == 0.0


def test_build_hyperedges_examples():
    edges = build_hyperedges(ClusterAssignment(["f1", "f2", "f3"], np.array([0, 0, 1])))
    assert {e.cluster: set(e.members) for e in edges} == {0: {"f1", "f2"}, 1: {"f3"}}
    same = build_hyperedges(ClusterAssignment(["f1", "f1"], np.array([4, 4])))
    assert [(e.cluster, e.members) for e in same] == [(4, ("f1",))]
    gap = build_hyperedges(ClusterAssignment(["a", "b", "c"], np.array([0, 3, 9])))
    assert [e.cluster for e in gap] == [0, 3, 9]
    filtered = build_hyperedges(ClusterAssignment(["a", "b", "c"], np.array([0, 0, 1])), min_members=2)
    assert [e.cluster for e in filtered] == [0]


def test_every_function_with_a_behavior_is_covered():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 4))
    ids = [f"f{i}" for i in rng.integers(0, 20, size=60)]
    _, assignment = kmeans(X, 7, function_ids=ids)
    covered = {m for e in build_hyperedges(assignment) for m in e.members}
    assert covered == set(ids)
    assert len(assignment) == 60


def test_assign_new_examples():
    C = np.array([[0.0, 0], [5, 5], [1, 0], [9, 9], [3, 3], [7, 7], [2, 2], [-1, 0]])
    assert assign_new(C[5], C).tolist() == [5]
    # equidistant to centroid 2 ([1, 0]) and centroid 7 ([-1, 0])
    assert assign_new([[0.0, 0.0]], np.array([[9, 9], [9, -9], [1, 0], [8, 8], [8, 9], [9, 8], [7, 9], [-1, 0]])).tolist() == [2]
    assert assign_new(np.zeros((0, 2)), C).shape == (0,)
    before = C.copy()
    assign_new(np.ones((3, 2)), C)
    assert np.array_equal(C, before)


def test_assign_new_agrees_with_kmeans():
    rng = np.random.default_rng(3)
    for _ in range(20):
        X = rng.normal(size=(int(rng.integers(5, 80)), 3))
        centroids, assignment = kmeans(X, int(rng.integers(1, 9)), seed=int(rng.integers(50)))
        assert np.array_equal(assign_new(X, centroids), assignment.clusters)


def test_converged_solution_is_locally_optimal():
    # no point can be moved to another (fixed) centroid to lower the SSE, and
    # every centroid is the mean of its members
    rng = np.random.default_rng(4)
    for _ in range(20):
        X = rng.normal(size=(50, 2)) + rng.integers(0, 4, size=(50, 1)) * 3
        centroids, assignment = kmeans(X, 4, seed=int(rng.integers(50)))
        labels = assignment.clusters
        base = sse(X, centroids, labels)
        for i in range(len(X)):
            for k in range(len(centroids)):
                moved = labels.copy()
                moved[i] = k
                assert sse(X, centroids, moved) >= base - 1e-12
        for k in range(len(centroids)):
            if np.any(labels == k):
                np.testing.assert_allclose(centroids[k], X[labels == k].mean(0), rtol=0, atol=1e-12)


def test_empty_clusters_are_reseeded():
    # many duplicates: k-means++ can run out of distinct seeds, repair must keep K
    X = np.vstack([np.zeros((20, 2)), np.ones((20, 2)), [[5.0, 5.0]], [[6.0, 6.0]]])
    centroids, assignment = kmeans(X, 3, seed=0)
    assert len(centroids) == 3
    assert np.isfinite(centroids).all()


def test_kmeans_is_deterministic():
    X = np.random.default_rng(5).normal(size=(100, 5))
    a = kmeans(X, 6, seed=11)
    b = kmeans(X, 6, seed=11)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1].clusters, b[1].clusters)
