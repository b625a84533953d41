"""Spectral clustering of graph nodes.

The node similarity signal is two-fold: the graph's symmetrized adjacency
(structural) and pairwise cosine similarity of the seven-statistic node
embeddings (featural).  Both are folded into one Laplacian S = D - (A + C)
whose smallest eigenvectors embed the nodes; average-linkage agglomeration
on that embedding yields the clusters.  The eigensolver is a cyclic Jacobi
iteration, exact enough for the small symmetric matrices this package
produces and free of library-version drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (
    DimensionTooLarge,
    InvalidK,
    NoConvergence,
    ShapeMismatch,
    ZeroVector,
)
from .graph import FSTGraph, node_embeddings, symmetric_adjacency

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class Clustering:
    """Partition of node ids: assignment maps id to cluster index.

    clusters[i] is the ascending tuple of ids in cluster i; clusters are
    ordered by their smallest member id, which fixes the index labels.
    """

    assignment: dict[int, int]
    clusters: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.clusters)


def cosine_similarity_matrix(embeddings: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity with a zeroed diagonal.

    Exactly symmetric (the lower triangle mirrors the upper one).  Raises
    ZeroVector if any row has zero norm.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    # Cosine is invariant to positive row scaling; dividing each row by its
    # max magnitude first keeps the dot products finite for huge columns.
    peaks = np.abs(e).max(axis=1)
    for i, pv in enumerate(peaks):
        if pv == 0.0:
            raise ZeroVector(i)
    e = e / peaks[:, None]
    norms = np.sqrt((e * e).sum(axis=1))
    m = (e @ e.T) / np.outer(norms, norms)
    np.clip(m, -1.0, 1.0, out=m)
    m = np.triu(m, 1)
    return m + m.T


def enhanced_laplacian(adjacency: np.ndarray, similarity: np.ndarray) -> np.ndarray:
    """S = D - W for W = adjacency + similarity, D the row-sum diagonal."""
    a = np.asarray(adjacency, dtype=np.float64)
    c = np.asarray(similarity, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"adjacency must be square, got {a.shape}")
    if a.shape != c.shape:
        raise ShapeMismatch(f"shape mismatch: {a.shape} vs {c.shape}")
    w = a + c
    return np.diag(w.sum(axis=1)) - w


@njit(cache=True)
def _jacobi_kernel(a, v, tol, max_sweeps):  # pragma: no cover - compiled
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if math.sqrt(2.0 * off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                app, aqq = a[p, p], a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip, aiq = a[i, p], a[i, q]
                        a[i, p] = aip - s * (aiq + tau * aip)
                        a[p, i] = a[i, p]
                        a[i, q] = aiq + s * (aip - tau * aiq)
                        a[q, i] = a[i, q]
                for i in range(n):
                    vip, viq = v[i, p], v[i, q]
                    v[i, p] = vip - s * (viq + tau * vip)
                    v[i, q] = viq + s * (vip - tau * viq)
    off = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            off += a[p, q] * a[p, q]
    if math.sqrt(2.0 * off) <= tol:
        return max_sweeps
    return -1


def symmetric_eigen(
    matrix: np.ndarray,
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a real symmetric matrix.

    Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
    below tol.  Returns (eigenvalues ascending, eigenvectors as columns in
    the matching order); ties keep the pre-sort order, so the output is a
    pure function of the input.  Raises NoConvergence if max_sweeps full
    sweeps are not enough.
    """
    s = np.asarray(matrix, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeMismatch(f"need a square matrix, got {s.shape}")
    n = s.shape[0]
    a = s.copy()
    v = np.eye(n)
    swept = _jacobi_kernel(a, v, tol, max_sweeps)
    if swept < 0:
        off = float(np.sqrt(2.0 * (np.triu(a, 1) ** 2).sum()))
        raise NoConvergence(max_sweeps, off)
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], v[:, order]


def spectral_embed(laplacian: np.ndarray, dims: int) -> np.ndarray:
    """Rows of the dims smallest eigenvectors: one coordinate row per node."""
    n = laplacian.shape[0]
    if dims > n:
        raise DimensionTooLarge(dims, n)
    _, vecs = symmetric_eigen(laplacian)
    return vecs[:, :dims].copy()


def agglomerate(coords: np.ndarray, k: int) -> Clustering:
    """Average-linkage agglomeration down to k clusters.

    Starts from singletons and repeatedly merges the pair with the least
    mean pairwise Euclidean distance.  Distance ties are broken by the
    smaller (min id, other min id) pair of the candidates, so the result
    is deterministic.  Ids here are the row indices of coords.
    """
    pts = np.asarray(coords, dtype=np.float64)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(k, n)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    clusters: list[list[int]] = [[i] for i in range(n)]
    while len(clusters) > k:
        best = None
        best_key = None
        for i in range(len(clusters) - 1):
            for j in range(i + 1, len(clusters)):
                a, b = clusters[i], clusters[j]
                d = float(dist[np.ix_(a, b)].mean())
                lo, hi = min(a[0], b[0]), max(a[0], b[0])
                key = (d, lo, hi)
                if best_key is None or key < best_key:
                    best_key = key
                    best = (i, j)
        i, j = best
        merged = sorted(clusters[i] + clusters[j])
        clusters = [c for idx, c in enumerate(clusters) if idx not in (i, j)]
        clusters.append(merged)
    clusters.sort(key=lambda c: c[0])
    assignment = {i: ci for ci, c in enumerate(clusters) for i in c}
    return Clustering(assignment, tuple(tuple(c) for c in clusters))


def cluster_graph(graph: FSTGraph, k: int, signal: str = "both") -> Clustering:
    """Cluster the live nodes of a graph into k groups.

    signal picks the similarity evidence: "both" (default), "structure"
    (adjacency only), or "feature" (embedding cosine only).  Cluster ids
    in the result are real node ids, not positions.
    """
    ids = graph.node_ids()
    n = len(ids)
    if not 1 <= k <= n:
        raise InvalidK(k, n)
    if signal == "structure":
        cos = np.zeros((n, n))
    else:
        cos = cosine_similarity_matrix(node_embeddings(graph))
    if signal == "feature":
        adj = np.zeros((n, n))
    else:
        adj = symmetric_adjacency(graph)
    lap = enhanced_laplacian(adj, cos)
    coords = spectral_embed(lap, min(8, n))
    positional = agglomerate(coords, k)
    clusters = tuple(tuple(ids[p] for p in c) for c in positional.clusters)
    assignment = {i: ci for ci, c in enumerate(clusters) for i in c}
    return Clustering(assignment, clusters)
