"""Spectral machinery: similarity, Laplacian, Jacobi eigen, agglomeration."""

import time

import numpy as np
import pytest

from featgraph.cluster import (
    Clustering,
    agglomerate,
    cluster_graph,
    cosine_similarity_matrix,
    enhanced_laplacian,
    spectral_embed,
    symmetric_eigen,
)
from featgraph.errors import (
    DimensionTooLarge,
    InvalidK,
    ShapeMismatch,
    ZeroVector,
)
from featgraph.graph import add_transform, init_graph
from featgraph.ops import operation_by_name
from featgraph.tabular import split

from conftest import make_classification


def test_cosine_similarity_hand_case():
    e = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 3.0]])
    m = cosine_similarity_matrix(e)
    assert np.allclose(np.diag(m), 0.0)
    assert m[0, 1] == pytest.approx(0.0)
    assert m[0, 2] == pytest.approx(np.sqrt(0.5))
    assert m[1, 2] == pytest.approx(np.sqrt(0.5))
    assert np.array_equal(m, m.T)


def test_cosine_similarity_survives_huge_rows():
    # Columns clipped at the overflow cap must still compare finitely.
    e = np.array([[1e300, 1e300, 0.0], [1e300, 0.0, 1e300], [1.0, 1.0, 1.0]])
    m = cosine_similarity_matrix(e)
    assert np.all(np.isfinite(m))
    assert m[0, 1] == pytest.approx(0.5)


def test_cosine_similarity_rejects_zero_rows():
    with pytest.raises(ZeroVector):
        cosine_similarity_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_enhanced_laplacian_oracle():
    adj = np.array([[0.0, 1.0], [1.0, 0.0]])
    sim = np.array([[0.0, 0.25], [0.25, 0.0]])
    lap = enhanced_laplacian(adj, sim)
    assert np.allclose(lap, [[1.25, -1.25], [-1.25, 1.25]])
    assert np.allclose(lap.sum(axis=1), 0.0)
    with pytest.raises(ShapeMismatch):
        enhanced_laplacian(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ShapeMismatch):
        enhanced_laplacian(np.zeros((2, 2)), np.zeros((3, 3)))


def test_two_by_two_eigenvalues_exact():
    s = np.array([[2.0, -2.0], [-2.0, 2.0]])
    vals, vecs = symmetric_eigen(s)
    assert abs(vals[0] - 0.0) <= 1e-10
    assert abs(vals[1] - 4.0) <= 1e-10
    assert np.max(np.abs(vecs @ np.diag(vals) @ vecs.T - s)) <= 1e-10


@pytest.mark.parametrize("n", [1, 2, 5, 17, 50])
def test_eigen_reconstruction_and_orthogonality(n):
    rng = np.random.default_rng(n)
    base = rng.normal(size=(n, n))
    s = (base + base.T) / 2.0
    vals, vecs = symmetric_eigen(s)
    assert np.all(np.diff(vals) >= 0.0)
    recon = vecs @ np.diag(vals) @ vecs.T
    assert np.max(np.abs(recon - s)) <= 1e-8
    assert np.max(np.abs(vecs.T @ vecs - np.eye(n))) <= 1e-8


def test_eigen_matches_numpy_up_to_sign():
    rng = np.random.default_rng(99)
    base = rng.normal(size=(12, 12))
    s = base + base.T
    vals, _ = symmetric_eigen(s)
    assert np.allclose(vals, np.linalg.eigvalsh(s), atol=1e-9)


def test_eigen_rejects_non_square():
    with pytest.raises(ShapeMismatch):
        symmetric_eigen(np.zeros((2, 3)))


def test_spectral_embed_shape_and_guard():
    lap = enhanced_laplacian(np.zeros((4, 4)), np.zeros((4, 4)))
    emb = spectral_embed(lap, 3)
    assert emb.shape == (4, 3)
    with pytest.raises(DimensionTooLarge):
        spectral_embed(lap, 5)


def oracle_average_linkage(points, k):
    """From-scratch agglomeration: mean pairwise distance, recomputed
    naively each round, ties broken by (distance, min id, other min id)."""
    n = len(points)
    clusters = [frozenset([i]) for i in range(n)]
    while len(clusters) > k:
        best_key, best_pair = None, None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                dsum = 0.0
                for a in clusters[i]:
                    for b in clusters[j]:
                        dsum += float(np.linalg.norm(points[a] - points[b]))
                d = dsum / (len(clusters[i]) * len(clusters[j]))
                lo = min(min(clusters[i]), min(clusters[j]))
                hi = max(min(clusters[i]), min(clusters[j]))
                key = (d, lo, hi)
                if best_key is None or key < best_key:
                    best_key, best_pair = key, (i, j)
        i, j = best_pair
        merged = clusters[i] | clusters[j]
        clusters = [c for idx, c in enumerate(clusters) if idx not in (i, j)]
        clusters.append(merged)
    ordered = sorted(clusters, key=min)
    return tuple(tuple(sorted(c)) for c in ordered)


def test_agglomerate_matches_oracle_on_50_instances():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    for trial in range(50):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, n + 1))
        dims = int(rng.integers(1, 4))
        pts = rng.normal(size=(n, dims))
        if trial % 3 == 0:
            # Duplicated points force distance ties through the id rule.
            pts[n // 2] = pts[0]
        got = agglomerate(pts, k)
        want = oracle_average_linkage(pts, k)
        assert got.clusters == want, f"trial {trial}: {got.clusters} != {want}"
        assert got.k == k
    assert time.time() - t0 < 10.0


def test_agglomerate_assignment_consistent():
    pts = np.array([[0.0], [0.1], [5.0], [5.1], [9.9]])
    res = agglomerate(pts, 3)
    assert res.clusters == ((0, 1), (2, 3), (4,))
    for ci, members in enumerate(res.clusters):
        for m in members:
            assert res.assignment[m] == ci


def test_agglomerate_invalid_k():
    pts = np.zeros((3, 2))
    with pytest.raises(InvalidK):
        agglomerate(pts, 0)
    with pytest.raises(InvalidK):
        agglomerate(pts, 4)


def _sample_graph():
    train, _ = split(make_classification())
    g = init_graph(train)
    add_transform(g, operation_by_name("sin"), (0,))
    add_transform(g, operation_by_name("multiply"), (0, 1))
    add_transform(g, operation_by_name("standardize"), (2,))
    return g


@pytest.mark.parametrize("signal", ["both", "structure", "feature"])
def test_cluster_graph_partitions_node_ids(signal):
    g = _sample_graph()
    res = cluster_graph(g, 3, signal)
    assert isinstance(res, Clustering)
    members = sorted(m for c in res.clusters for m in c)
    assert members == g.node_ids()
    # Clusters are labeled in order of their smallest node id.
    firsts = [c[0] for c in res.clusters]
    assert firsts == sorted(firsts)


def test_cluster_graph_k_bounds():
    g = _sample_graph()
    single = cluster_graph(g, 1)
    assert single.k == 1 and len(single.clusters[0]) == g.node_count
    with pytest.raises(InvalidK):
        cluster_graph(g, g.node_count + 1)


def test_cluster_graph_deterministic():
    g = _sample_graph()
    a = cluster_graph(g, 3, "both")
    b = cluster_graph(g, 3, "both")
    assert a.clusters == b.clusters
