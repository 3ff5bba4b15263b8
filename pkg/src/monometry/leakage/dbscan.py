"""DBSCAN on 2D (or any-dimensional) Euclidean points."""
from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial import cKDTree

NOISE = -1


def dbscan(points, eps: float, min_samples: int) -> np.ndarray:
    """Density clustering; returns one label per point, ``-1`` for noise.

    A point is core when at least ``min_samples`` points (itself included) lie
    within ``eps``. Clusters are numbered in order of their lowest-index core
    point; a border point reachable from several clusters joins the first one
    numbered.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    if min_samples < 1:
        raise ValueError(f"min_samples must be >= 1, got {min_samples!r}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 2)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    neighbours = cKDTree(pts).query_ball_point(pts, r=eps)
    core = np.array([len(nb) >= min_samples for nb in neighbours])

    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = cluster
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for q in neighbours[p]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                    if core[q]:
                        queue.append(q)
        cluster += 1
    return labels


def core_mask(points, eps: float, min_samples: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    counts = np.array([len(nb) for nb in cKDTree(pts).query_ball_point(pts, r=eps)])
    return counts >= min_samples
