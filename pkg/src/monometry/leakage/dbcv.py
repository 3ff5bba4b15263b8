"""Density-Based Clustering Validation index."""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .dbscan import NOISE


class TooFewClusters(ValueError):
    pass


def core_distances(points: np.ndarray) -> np.ndarray:
    """All-points core distance inside one cluster.

    ``(mean over other members of (1/d)^dim) ** (-1/dim)``; a duplicate point
    gives an infinite inverse distance and so a core distance of 0.
    """
    n, dim = points.shape
    d = cdist(points, points)
    with np.errstate(divide="ignore"):
        inv = (1.0 / d) ** dim
    np.fill_diagonal(inv, 0.0)
    # sorted so the sum, and hence MST ties, do not depend on member order
    mean_inv = np.sort(inv, axis=1).sum(axis=1) / (n - 1)
    with np.errstate(divide="ignore"):
        return mean_inv ** (-1.0 / dim)


def mutual_reachability(d: np.ndarray, core_a: np.ndarray, core_b: np.ndarray) -> np.ndarray:
    return np.maximum(d, np.maximum(core_a[:, None], core_b[None, :]))


def minimum_spanning_tree(weights: np.ndarray,
                          tiebreak: np.ndarray | None = None) -> list[tuple[int, int, float]]:
    """Prim's algorithm on a dense symmetric matrix (zero weights are real edges).

    Equal weights are ordered by ``tiebreak`` so that the tree, and everything
    derived from it, does not depend on point order. Mutual reachability ties
    are common because many edges collapse onto a core distance.
    """
    n = len(weights)
    if tiebreak is None:
        tiebreak = np.zeros_like(weights)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].copy()
    best_tb = tiebreak[0].copy()
    parent = np.zeros(n, dtype=np.int64)
    edges = []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        lowest = cand == cand.min()
        j = int(np.argmin(np.where(lowest, best_tb, np.inf)))
        edges.append((int(parent[j]), j, float(best[j])))
        in_tree[j] = True
        w, tb = weights[j], tiebreak[j]
        closer = (w < best) | ((w == best) & (tb < best_tb))
        best = np.where(closer, w, best)
        best_tb = np.where(closer, tb, best_tb)
        parent = np.where(closer, j, parent)
    return edges


def dbcv(points, labels) -> float:
    """Weighted mean of per-cluster validity; noise counts in the total but scores 0.

    Per cluster: sparseness is the largest mutual-reachability MST edge joining
    two internal (degree > 1) nodes, separation the smallest mutual-reachability
    distance from its internal nodes to another cluster's internal nodes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 2)
    labels = np.asarray(labels)
    clusters = [c for c in sorted(set(labels.tolist())) if c != NOISE]
    clusters = [c for c in clusters if np.sum(labels == c) >= 2]
    if len(clusters) < 2:
        raise TooFewClusters("DBCV needs at least two clusters with two or more points")

    members, cores, internal, sparseness = {}, {}, {}, {}
    for c in clusters:
        idx = np.flatnonzero(labels == c)
        p = pts[idx]
        core = core_distances(p)
        d = cdist(p, p)
        edges = minimum_spanning_tree(mutual_reachability(d, core, core), d)
        degree = np.zeros(len(idx), dtype=int)
        for a, b, _ in edges:
            degree[a] += 1
            degree[b] += 1
        inner = degree > 1
        if not inner.any():
            inner = np.ones(len(idx), dtype=bool)
        inner_edges = [w for a, b, w in edges if inner[a] and inner[b]] or [w for _, _, w in edges]
        members[c], cores[c], internal[c] = idx, core, inner
        sparseness[c] = max(inner_edges)

    total = 0.0
    for c in clusters:
        pc = pts[members[c]][internal[c]]
        cc = cores[c][internal[c]]
        separation = np.inf
        for o in clusters:
            if o == c:
                continue
            po = pts[members[o]][internal[o]]
            co = cores[o][internal[o]]
            separation = min(separation, float(mutual_reachability(cdist(pc, po), cc, co).min()))
        denom = max(separation, sparseness[c])
        validity = 0.0 if denom == 0 else (separation - sparseness[c]) / denom
        total += len(members[c]) * validity
    return total / len(labels)
